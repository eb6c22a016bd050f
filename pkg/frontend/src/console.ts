/**
 * Operator console core: holds no authoritative simulation state, only the
 * latest snapshot plus UI state (selection, pending commands, open
 * windows). Every mutating action round-trips through the gateway.
 *
 * Commands follow the two-click flow: left-click a collective, left-click
 * a target, then press a command button. Buttons stay disabled until the
 * acknowledgment for the previous command returns; an illegal ack surfaces
 * the server's system message verbatim in the monitor area.
 */

import { buildScene, type Scene } from "./scene.js";
import type {
  CommandAckPayload,
  HelloPayload,
  ProbeQuestionPayload,
  Snapshot,
  ViewMode,
} from "./types.js";
import { makeMessage, type WireMessage } from "./wire.js";
import { WindowManager } from "./windows.js";

export type SendFn = (msg: WireMessage) => void;
export type CommandKind = "investigate" | "abandon" | "cancel_abandon" | "decide";

export interface ActiveProbe {
  payload: ProbeQuestionPayload;
  askedAtWall: number;
}

const MESSAGE_LIMIT = 12;

export class OperatorConsole {
  hello: HelloPayload | null = null;
  snapshot: Snapshot | null = null;
  selectedCollective: string | null = null;
  selectedTarget: number | null = null;
  awaitingAck = false;
  pendingRef: string | null = null;
  messages: string[] = [];
  activeProbe: ActiveProbe | null = null;
  trialEnded = false;
  readonly windows: WindowManager;
  private refCounter = 0;
  private acks: ((ack: CommandAckPayload) => void)[] = [];

  constructor(private readonly send: SendFn, readonly mode: ViewMode = "ia") {
    this.windows = new WindowManager((entityKind, entityId, action, x, y) => {
      this.send(
        makeMessage("info_window_toggle", {
          entity_kind: entityKind,
          entity: entityId,
          action,
          x,
          y,
        }),
      );
    });
  }

  join(): void {
    this.send(makeMessage("join"));
  }

  /** Route one server message; returns its type for callers that care. */
  handle(msg: WireMessage): string {
    switch (msg.type) {
      case "hello":
        this.hello = msg.payload as unknown as HelloPayload;
        break;
      case "snapshot":
        this.snapshot = msg.payload as unknown as Snapshot;
        this.windows.prune(this.snapshot);
        break;
      case "command_ack": {
        const ack = msg.payload as unknown as CommandAckPayload;
        if (ack.client_ref && ack.client_ref === this.pendingRef) {
          this.awaitingAck = false;
          this.pendingRef = null;
        }
        if (ack.verdict !== "legal") {
          this.pushMessage(`${ack.verdict}: ${ack.cmd_kind} ${ack.coll} target ${ack.target}`);
        }
        for (const fn of this.acks.splice(0)) fn(ack);
        break;
      }
      case "system_message": {
        const text = String(msg.payload.msg ?? "");
        if (text) this.pushMessage(text);
        break;
      }
      case "probe_question":
        this.activeProbe = {
          payload: msg.payload as unknown as ProbeQuestionPayload,
          askedAtWall: Date.now(),
        };
        break;
      case "decision_event": {
        const ev = msg.payload as Record<string, unknown>;
        if (ev.event === "DecisionCompleted") {
          this.pushMessage(`collective ${ev.coll} completed decision ${ev.index}`);
        }
        break;
      }
      case "trial_ended":
        this.trialEnded = true;
        this.pushMessage(`trial ended: ${msg.payload.reason}`);
        break;
      default:
        break;
    }
    return msg.type;
  }

  private pushMessage(text: string): void {
    this.messages.push(text);
    if (this.messages.length > MESSAGE_LIMIT) this.messages.shift();
  }

  // -- selection & commands -------------------------------------------------

  selectCollective(id: string): void {
    this.selectedCollective = id;
  }

  selectTarget(id: number): void {
    this.selectedTarget = id;
  }

  /**
   * Issue a command for the current selection. Returns the client_ref, or
   * null when the selection is incomplete or an ack is still outstanding.
   */
  issueCommand(kind: CommandKind, onAck?: (ack: CommandAckPayload) => void): string | null {
    if (this.awaitingAck || this.selectedCollective === null || this.selectedTarget === null) {
      if (this.selectedCollective === null || this.selectedTarget === null) {
        this.pushMessage("select a collective, then a target, before issuing a command");
      }
      return null;
    }
    const ref = `ref-${++this.refCounter}`;
    this.awaitingAck = true;
    this.pendingRef = ref;
    if (onAck) this.acks.push(onAck);
    this.send(
      makeMessage("command", {
        kind,
        collective: this.selectedCollective,
        target: this.selectedTarget,
        client_ref: ref,
      }),
    );
    return ref;
  }

  /** Cancel a selected abandon assignment from the assignments log. */
  cancelAssignment(coll: string, target: number): string | null {
    this.selectedCollective = coll;
    this.selectedTarget = target;
    return this.issueCommand("cancel_abandon");
  }

  // -- probes ---------------------------------------------------------------

  answerProbe(response: string): boolean {
    if (this.activeProbe === null) return false;
    this.send(
      makeMessage("probe_answer", {
        probe: this.activeProbe.payload.probe,
        response,
      }),
    );
    this.activeProbe = null;
    return true;
  }

  // -- windows ----------------------------------------------------------------

  toggleWindow(entityKind: "target" | "collective", entityId: string, x: number, y: number): void {
    this.windows.toggle(entityKind, entityId, x, y);
  }

  // -- rendering --------------------------------------------------------------

  scene(): Scene | null {
    if (this.snapshot === null || this.hello === null) return null;
    return buildScene({
      snapshot: this.snapshot,
      mode: this.mode,
      world: this.hello.world,
      selectedCollective: this.selectedCollective,
      selectedTarget: this.selectedTarget,
      messages: this.messages,
      windows: this.windows.open,
      awaitingAck: this.awaitingAck,
    });
  }
}
