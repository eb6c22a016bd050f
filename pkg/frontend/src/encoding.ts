/**
 * Visual encodings for both console views.
 *
 * Every color or opacity mapping here is a monotone function of the
 * quantity it encodes; the tests assert that property directly on these
 * functions rather than on rendered pixels.
 */

import type { AgentState, CollectiveSnapshot, TargetSnapshot, ViewMode } from "./types.js";

export const VALUE_MIN = 67;
export const VALUE_MAX = 100;
export const COLLECTIVE_SIZE = 200;
export const QUORUM_FRACTION = 0.3;

export const CANVAS_W = 1920;
export const CANVAS_H = 1080;

/** Normalized 0..1 position of a value inside the published value range. */
export function valueUnit(value: number): number {
  const clamped = Math.min(VALUE_MAX, Math.max(VALUE_MIN, value));
  return (clamped - VALUE_MIN) / (VALUE_MAX - VALUE_MIN);
}

/** Green fill opacity for an assessed target: brighter means higher value. */
export function targetFillOpacity(value: number): number {
  return 0.25 + 0.75 * valueUnit(value);
}

/** Blue support-section opacity: brighter means more favoring entities. */
export function supportOpacity(count: number): number {
  const unit = Math.min(1, Math.max(0, count / COLLECTIVE_SIZE));
  return 0.1 + 0.9 * unit;
}

/** Quadrant brightness (0..255 gray level) for the abstract collective icon. */
export function quadrantBrightness(count: number): number {
  const unit = Math.min(1, Math.max(0, count / COLLECTIVE_SIZE));
  return Math.round(40 + 215 * unit);
}

/** Entity dot colors on the IA view; committed and executing share blue. */
export const AGENT_STATE_COLORS: Record<AgentState, string> = {
  U: "#e6c229", // uncommitted: yellow
  F: "#3fa34d", // favoring: green
  C: "#2f6db3", // committed: blue
  X: "#2f6db3", // executing: blue
};

export type OutlineKind =
  | "none"
  | "in_range" // yellow: explored, in range, not favored (IA)
  | "favored" // white (IA)
  | "abandoned" // red (IA)
  | "supported" // blue: support above the 30% quorum (collective view)
  | "executing"; // green (collective view)

export const OUTLINE_COLORS: Record<Exclude<OutlineKind, "none">, string> = {
  in_range: "#e6c229",
  favored: "#ffffff",
  abandoned: "#d7263d",
  supported: "#2f6db3",
  executing: "#3fa34d",
};

export interface OutlineContext {
  inRange: boolean;
  favored: boolean;
  abandoned: boolean;
  supportCount: number;
  executing: boolean;
}

/** Outline for a target icon, relative to the selected collective. */
export function targetOutline(mode: ViewMode, ctx: OutlineContext): OutlineKind {
  if (mode === "collective") {
    if (ctx.executing) return "executing";
    if (ctx.supportCount > QUORUM_FRACTION * COLLECTIVE_SIZE) return "supported";
    if (ctx.abandoned) return "abandoned";
    return ctx.inRange ? "in_range" : "none";
  }
  if (ctx.abandoned) return "abandoned";
  if (ctx.favored) return "favored";
  if (ctx.inRange) return "in_range";
  return "none";
}

export function outlineContext(
  target: TargetSnapshot,
  collective: CollectiveSnapshot,
  searchRadiusPx: number,
  scale: (xy: [number, number]) => [number, number],
): OutlineContext {
  const [tx, ty] = scale([target.x, target.y]);
  const [hx, hy] = scale(collective.hub);
  const inRange = Math.hypot(tx - hx, ty - hy) <= searchRadiusPx;
  const support = collective.support[String(target.id)] ?? 0;
  return {
    inRange,
    favored: support > 0,
    abandoned: collective.ignored.includes(target.id),
    supportCount: support,
    executing: collective.executing === target.id,
  };
}

/** Highest-supporting collective for a target (collective-view blue half). */
export function highestSupport(
  target: TargetSnapshot,
  collectives: CollectiveSnapshot[],
): { coll: string | null; count: number } {
  let best: string | null = null;
  let count = 0;
  for (const c of collectives) {
    const n = c.support[String(target.id)] ?? 0;
    if (n > count) {
      best = c.id;
      count = n;
    }
  }
  return { coll: best, count };
}

export interface LegendEntry {
  swatch: string;
  label: string;
}

/** Legend contents; placement differs per view (IA lower-right, abstract upper-left). */
export function legendEntries(mode: ViewMode): LegendEntry[] {
  const outlines: LegendEntry[] = [
    { swatch: OUTLINE_COLORS.in_range, label: "target in search range" },
    { swatch: OUTLINE_COLORS.abandoned, label: "target abandoned" },
  ];
  if (mode === "ia") {
    return [
      { swatch: AGENT_STATE_COLORS.U, label: "uncommitted entity" },
      { swatch: AGENT_STATE_COLORS.F, label: "favoring entity" },
      { swatch: AGENT_STATE_COLORS.C, label: "committed / executing entity" },
      ...outlines,
      { swatch: OUTLINE_COLORS.favored, label: "target favored" },
    ];
  }
  return [
    ...outlines,
    { swatch: OUTLINE_COLORS.supported, label: "support above 30%" },
    { swatch: OUTLINE_COLORS.executing, label: "collective executing" },
  ];
}

export function legendCorner(mode: ViewMode): "lower-right" | "upper-left" {
  return mode === "ia" ? "lower-right" : "upper-left";
}
