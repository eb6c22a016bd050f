/**
 * Pure scene construction: snapshot in, drawable description out.
 *
 * The console keeps the classic three-region layout: the central map, the
 * collective request area on the lower left, and the monitor area (the
 * assignments log plus system messages) on the right. Scenes are plain
 * data so tests can assert on structure instead of pixels.
 */

import {
  AGENT_STATE_COLORS,
  CANVAS_H,
  CANVAS_W,
  highestSupport,
  legendCorner,
  legendEntries,
  outlineContext,
  quadrantBrightness,
  supportOpacity,
  targetFillOpacity,
  targetOutline,
  type LegendEntry,
  type OutlineKind,
} from "./encoding.js";
import type { AssignmentRow, Snapshot, TargetSnapshot, ViewMode } from "./types.js";
import type { InfoWindow } from "./windows.js";

export interface Rect {
  x: number;
  y: number;
  w: number;
  h: number;
}

export const MAP_REGION: Rect = { x: 430, y: 20, w: 1040, h: 1040 };
export const REQUEST_REGION: Rect = { x: 20, y: 640, w: 390, h: 420 };
export const MONITOR_REGION: Rect = { x: 1490, y: 20, w: 410, h: 1040 };

// World meters -> map pixels; ~1414 m across a 1040 px viewport.
export const SEARCH_RADIUS_M = 500;

export interface TargetIcon {
  id: number;
  x: number;
  y: number;
  assessed: boolean;
  fillOpacity: number; // green half (or whole icon on the IA view)
  supportOpacity: number; // blue half, collective view only
  supportColl: string | null;
  outline: OutlineKind;
  selected: boolean;
}

export interface CollectiveIcon {
  id: string;
  x: number;
  y: number;
  phase: string;
  quadrants?: { U: number; F: number; C: number; X: number }; // gray levels
  outline: "none" | "executing";
  selected: boolean;
  decisions: number;
}

export interface AgentDot {
  x: number;
  y: number;
  color: string;
}

export interface Scene {
  mode: ViewMode;
  t: number;
  regions: { map: Rect; request: Rect; monitor: Rect };
  targets: TargetIcon[];
  collectives: CollectiveIcon[];
  agents: AgentDot[];
  assignments: AssignmentRow[];
  messages: string[];
  legend: { corner: "lower-right" | "upper-left"; entries: LegendEntry[] };
  windows: InfoWindow[];
  searchRadiusPx: number;
  commandButtonsEnabled: boolean;
}

export interface SceneInputs {
  snapshot: Snapshot;
  mode: ViewMode;
  world: [number, number];
  selectedCollective: string | null;
  selectedTarget: number | null;
  messages: string[];
  windows: InfoWindow[];
  awaitingAck: boolean;
}

export function worldScale(world: [number, number]): (xy: [number, number]) => [number, number] {
  const sx = MAP_REGION.w / world[0];
  const sy = MAP_REGION.h / world[1];
  return ([x, y]) => [MAP_REGION.x + x * sx, MAP_REGION.y + y * sy];
}

export function buildScene(inputs: SceneInputs): Scene {
  const { snapshot, mode, world } = inputs;
  const scale = worldScale(world);
  const radiusPx = (SEARCH_RADIUS_M * MAP_REGION.w) / world[0];

  const selected =
    snapshot.collectives.find((c) => c.id === inputs.selectedCollective) ?? snapshot.collectives[0];

  const targets: TargetIcon[] = snapshot.targets.map((t: TargetSnapshot) => {
    const ctx = outlineContext(t, selected, radiusPx, scale);
    const [x, y] = scale([t.x, t.y]);
    const top = highestSupport(t, snapshot.collectives);
    return {
      id: t.id,
      x,
      y,
      assessed: t.assessed,
      fillOpacity: t.assessed && t.value !== undefined ? targetFillOpacity(t.value) : 0,
      supportOpacity: supportOpacity(top.count),
      supportColl: top.coll,
      outline: targetOutline(mode, ctx),
      selected: inputs.selectedTarget === t.id,
    };
  });

  const collectives: CollectiveIcon[] = snapshot.collectives.map((c) => {
    const [x, y] = scale(c.hub);
    return {
      id: c.id,
      x,
      y,
      phase: c.phase,
      quadrants:
        mode === "collective"
          ? {
              U: quadrantBrightness(c.counts.U),
              F: quadrantBrightness(c.counts.F),
              C: quadrantBrightness(c.counts.C),
              X: quadrantBrightness(c.counts.X),
            }
          : undefined,
      outline: c.phase === "executing" || c.phase === "relocating" ? "executing" : "none",
      selected: selected?.id === c.id && inputs.selectedCollective !== null,
      decisions: c.decisions,
    };
  });

  const agents: AgentDot[] =
    mode === "ia" && snapshot.agents
      ? snapshot.agents.map(([x, y, state]) => {
          const [px, py] = scale([x, y]);
          return { x: px, y: py, color: AGENT_STATE_COLORS[state] };
        })
      : [];

  return {
    mode,
    t: snapshot.t,
    regions: { map: MAP_REGION, request: REQUEST_REGION, monitor: MONITOR_REGION },
    targets,
    collectives,
    agents,
    assignments: snapshot.assignments,
    messages: inputs.messages,
    legend: { corner: legendCorner(mode), entries: legendEntries(mode) },
    windows: inputs.windows,
    searchRadiusPx: radiusPx,
    commandButtonsEnabled:
      !inputs.awaitingAck && inputs.selectedCollective !== null && inputs.selectedTarget !== null,
  };
}
