import type { HelloPayload, Snapshot } from "../src/types.js";

export const HELLO: HelloPayload = {
  session: "session-m2-easy-5",
  view: "ia",
  model: "m2",
  difficulty: "easy",
  world: [1414, 1414],
  hubs: [
    [350, 350],
    [1060, 350],
    [350, 1060],
    [1060, 1060],
  ],
  collectives: ["I", "II", "III", "IV"],
  dt: 0.1,
  speed: 1,
  duration_limit_s: 600,
};

export function snapshotFixture(overrides: Partial<Snapshot> = {}): Snapshot {
  return {
    t: 120.0,
    tick: 1200,
    paused: false,
    collectives: [
      {
        id: "I",
        hub: [350, 350],
        phase: "deliberating",
        counts: { U: 150, F: 50, C: 0, X: 0 },
        support: { "3": 50 },
        committed: null,
        executing: null,
        ignored: [7],
        decisions: 0,
      },
      {
        id: "II",
        hub: [1060, 350],
        phase: "committed",
        counts: { U: 100, F: 20, C: 80, X: 0 },
        support: { "5": 100 },
        committed: 5,
        executing: null,
        ignored: [],
        decisions: 1,
      },
      {
        id: "III",
        hub: [350, 1060],
        phase: "executing",
        counts: { U: 0, F: 0, C: 0, X: 200 },
        support: {},
        committed: null,
        executing: 9,
        ignored: [],
        decisions: 0,
      },
      {
        id: "IV",
        hub: [1060, 1060],
        phase: "deliberating",
        counts: { U: 200, F: 0, C: 0, X: 0 },
        support: {},
        committed: null,
        executing: null,
        ignored: [],
        decisions: 0,
      },
    ],
    targets: [
      { id: 3, x: 430, y: 300, assessed: true, value: 97 },
      { id: 5, x: 1100, y: 420, assessed: true, value: 80 },
      { id: 7, x: 300, y: 480, assessed: true, value: 67 },
      { id: 9, x: 420, y: 1180, assessed: false },
      { id: 12, x: 700, y: 700, assessed: true, value: 88 },
    ],
    assignments: [
      { kind: "investigate", coll: "I", target: 3, status: "complete", acks: 10 },
      { kind: "abandon", coll: "I", target: 7, status: "active", acks: 0 },
    ],
    decisions_total: 1,
    agents: [
      [350, 350, "U"],
      [400, 360, "F"],
      [1060, 350, "C"],
      [700, 700, "X"],
    ],
    ...overrides,
  };
}
