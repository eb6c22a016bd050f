/** Payload shapes received from the gateway. */

export type ViewMode = "ia" | "collective";
export type AgentState = "U" | "F" | "C" | "X";

export interface CollectiveSnapshot {
  id: string; // roman numeral
  hub: [number, number];
  phase: string;
  counts: Record<AgentState, number>;
  support: Record<string, number>; // target id -> reported support
  committed: number | null;
  executing: number | null;
  ignored: number[];
  decisions: number;
}

export interface TargetSnapshot {
  id: number;
  x: number;
  y: number;
  assessed: boolean;
  value?: number;
}

export interface AssignmentRow {
  kind: string;
  coll: string;
  target: number;
  status: "active" | "complete";
  acks: number;
}

export interface Snapshot {
  t: number;
  tick: number;
  paused: boolean;
  collectives: CollectiveSnapshot[];
  targets: TargetSnapshot[];
  assignments: AssignmentRow[];
  decisions_total: number;
  agents?: [number, number, AgentState][];
}

export interface HelloPayload {
  session: string;
  view: ViewMode;
  model: string;
  difficulty: string;
  world: [number, number];
  hubs: [number, number][];
  collectives: string[];
  dt: number;
  speed: number;
  duration_limit_s: number;
}

export interface ProbeQuestionPayload {
  probe: string;
  level: "SA_1" | "SA_2" | "SA_3";
  text: string;
  interest: string;
  answer_kind: "set" | "choice" | "bool";
  timeout_s: number;
  t: number;
}

export interface CommandAckPayload {
  cmd: string;
  verdict: "legal" | "illegal" | "error";
  reason: string;
  cmd_kind: string;
  coll: string;
  target: string;
  client_ref: string;
  t: number;
}
