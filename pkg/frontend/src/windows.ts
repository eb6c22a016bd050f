/**
 * Draggable info pop-up windows for targets and collectives.
 *
 * Windows open at a fixed offset right-below their entity, can be dragged
 * anywhere, and report every open/close to the gateway so clutter
 * accounting can count them. A window whose entity vanishes (an occupied
 * target) closes itself and reports that too.
 */

import type { Snapshot } from "./types.js";

export interface InfoWindow {
  entityKind: "target" | "collective";
  entityId: string;
  x: number;
  y: number;
  // Sized to match the clutter constants: target windows are the larger kind.
  w: number;
  h: number;
}

export const TARGET_WINDOW = { w: 211, h: 156 }; // ~32922 px^2
export const COLLECTIVE_WINDOW = { w: 198, h: 130 }; // ~25740 px^2
export const OPEN_OFFSET = { dx: 24, dy: 18 };

export type ToggleReport = (
  entityKind: "target" | "collective",
  entityId: string,
  action: "open" | "close",
  x: number,
  y: number,
) => void;

export class WindowManager {
  readonly open: InfoWindow[] = [];

  constructor(private readonly report: ToggleReport) {}

  toggle(entityKind: "target" | "collective", entityId: string, anchorX: number, anchorY: number): void {
    const existing = this.find(entityKind, entityId);
    if (existing) {
      this.close(existing);
      return;
    }
    const size = entityKind === "target" ? TARGET_WINDOW : COLLECTIVE_WINDOW;
    const win: InfoWindow = {
      entityKind,
      entityId,
      x: anchorX + OPEN_OFFSET.dx,
      y: anchorY + OPEN_OFFSET.dy,
      ...size,
    };
    this.open.push(win);
    this.report(entityKind, entityId, "open", win.x, win.y);
  }

  drag(win: InfoWindow, x: number, y: number): void {
    win.x = x;
    win.y = y;
  }

  close(win: InfoWindow): void {
    const idx = this.open.indexOf(win);
    if (idx >= 0) {
      this.open.splice(idx, 1);
      this.report(win.entityKind, win.entityId, "close", win.x, win.y);
    }
  }

  find(entityKind: "target" | "collective", entityId: string): InfoWindow | undefined {
    return this.open.find((w) => w.entityKind === entityKind && w.entityId === entityId);
  }

  /** Close windows whose entity disappeared from the latest snapshot. */
  prune(snapshot: Snapshot): void {
    const targets = new Set(snapshot.targets.map((t) => String(t.id)));
    for (const win of [...this.open]) {
      if (win.entityKind === "target" && !targets.has(win.entityId)) {
        this.close(win);
      }
    }
  }

  counts(): { targetWindows: number; collectiveWindows: number } {
    return {
      targetWindows: this.open.filter((w) => w.entityKind === "target").length,
      collectiveWindows: this.open.filter((w) => w.entityKind === "collective").length,
    };
  }
}
