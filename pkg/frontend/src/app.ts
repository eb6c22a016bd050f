/**
 * Browser entry point: connects to a gateway, renders the scene to a
 * 1920x1080 canvas, and wires mouse/keyboard interaction.
 *
 * Left-click selects (collective first, then target); right-click toggles
 * an entity's info pop-up window; command buttons live in the request
 * area. Probe questions appear as an overlay with answer controls.
 */

import { GatewayClient } from "./client.js";
import { CANVAS_H, CANVAS_W, OUTLINE_COLORS } from "./encoding.js";
import { OperatorConsole, type CommandKind } from "./console.js";
import type { Scene, TargetIcon } from "./scene.js";
import type { ViewMode } from "./types.js";

const TARGET_HALF = 13;
const COLLECTIVE_HALF = 20;

export function startApp(root: HTMLElement, url: string, mode: ViewMode): OperatorConsole {
  const canvas = document.createElement("canvas");
  canvas.width = CANVAS_W;
  canvas.height = CANVAS_H;
  canvas.style.width = "100%";
  root.appendChild(canvas);
  const ctx = canvas.getContext("2d")!;

  const socket = new WebSocket(url);
  const client = new GatewayClient(socket as any);
  const console_ = new OperatorConsole(client.send, mode);
  socket.addEventListener("open", () => console_.join());
  client.onMessage((msg) => {
    console_.handle(msg);
  });

  let dragging: { win: any; dx: number; dy: number } | null = null;

  canvas.addEventListener("contextmenu", (e) => e.preventDefault());
  canvas.addEventListener("mousedown", (event) => {
    const [mx, my] = canvasPoint(canvas, event);
    const scene = console_.scene();
    if (!scene) return;
    const win = scene.windows.find(
      (w) => mx >= w.x && mx <= w.x + w.w && my >= w.y && my <= w.y + w.h,
    );
    if (event.button === 0 && win) {
      dragging = { win, dx: mx - win.x, dy: my - win.y };
      return;
    }
    const coll = scene.collectives.find(
      (c) => Math.abs(mx - c.x) <= COLLECTIVE_HALF && Math.abs(my - c.y) <= COLLECTIVE_HALF,
    );
    const target = scene.targets.find(
      (t) => Math.abs(mx - t.x) <= TARGET_HALF && Math.abs(my - t.y) <= TARGET_HALF,
    );
    if (event.button === 2) {
      if (target) console_.toggleWindow("target", String(target.id), target.x, target.y);
      else if (coll) console_.toggleWindow("collective", coll.id, coll.x, coll.y);
      return;
    }
    if (coll) console_.selectCollective(coll.id);
    else if (target) console_.selectTarget(target.id);
    maybeClickButton(scene, mx, my, console_);
  });
  canvas.addEventListener("mousemove", (event) => {
    if (!dragging) return;
    const [mx, my] = canvasPoint(canvas, event);
    console_.windows.drag(dragging.win, mx - dragging.dx, my - dragging.dy);
  });
  canvas.addEventListener("mouseup", () => (dragging = null));

  document.addEventListener("keydown", (event) => {
    if (!console_.activeProbe) return;
    const kind = console_.activeProbe.payload.answer_kind;
    if (kind === "bool" && (event.key === "y" || event.key === "n")) {
      console_.answerProbe(event.key === "y" ? "yes" : "no");
    }
  });

  function frame() {
    const scene = console_.scene();
    if (scene) drawScene(ctx, scene, console_);
    requestAnimationFrame(frame);
  }
  requestAnimationFrame(frame);
  return console_;
}

function canvasPoint(canvas: HTMLCanvasElement, event: MouseEvent): [number, number] {
  const rect = canvas.getBoundingClientRect();
  return [
    ((event.clientX - rect.left) / rect.width) * CANVAS_W,
    ((event.clientY - rect.top) / rect.height) * CANVAS_H,
  ];
}

interface Button {
  kind: CommandKind;
  label: string;
  rect: { x: number; y: number; w: number; h: number };
}

function commandButtons(scene: Scene): Button[] {
  const { x, y, w } = scene.regions.request;
  const kinds: [CommandKind, string][] = [
    ["investigate", "Investigate"],
    ["abandon", "Abandon"],
    ["cancel_abandon", "Cancel Assignment"],
    ["decide", "Decide"],
  ];
  return kinds.map(([kind, label], i) => ({
    kind,
    label,
    rect: { x: x + 20, y: y + 70 + i * 62, w: w - 40, h: 46 },
  }));
}

function maybeClickButton(scene: Scene, mx: number, my: number, console_: OperatorConsole): void {
  for (const b of commandButtons(scene)) {
    const { x, y, w, h } = b.rect;
    if (mx >= x && mx <= x + w && my >= y && my <= y + h && scene.commandButtonsEnabled) {
      console_.issueCommand(b.kind);
    }
  }
}

export function drawScene(ctx: CanvasRenderingContext2D, scene: Scene, console_: OperatorConsole): void {
  ctx.fillStyle = "#10141c";
  ctx.fillRect(0, 0, CANVAS_W, CANVAS_H);

  // Map region.
  const map = scene.regions.map;
  ctx.fillStyle = "#1b2230";
  ctx.fillRect(map.x, map.y, map.w, map.h);

  for (const dot of scene.agents) {
    ctx.fillStyle = dot.color;
    ctx.fillRect(dot.x - 1.5, dot.y - 1.5, 3, 3);
  }

  for (const t of scene.targets) {
    drawTarget(ctx, t, scene.mode);
  }

  for (const c of scene.collectives) {
    ctx.strokeStyle = c.outline === "executing" ? OUTLINE_COLORS.executing : "#aab4c4";
    ctx.lineWidth = c.selected ? 4 : 2;
    ctx.strokeRect(c.x - COLLECTIVE_HALF, c.y - COLLECTIVE_HALF, COLLECTIVE_HALF * 2, COLLECTIVE_HALF * 2);
    if (c.quadrants) {
      const q = c.quadrants;
      const cells: [number, keyof typeof q][] = [
        [0, "U"],
        [1, "F"],
        [2, "C"],
        [3, "X"],
      ];
      for (const [i, key] of cells) {
        const gx = c.x - COLLECTIVE_HALF + (i % 2) * COLLECTIVE_HALF;
        const gy = c.y - COLLECTIVE_HALF + Math.floor(i / 2) * COLLECTIVE_HALF;
        const g = q[key];
        ctx.fillStyle = `rgb(${g},${g},${g})`;
        ctx.fillRect(gx + 1, gy + 1, COLLECTIVE_HALF - 2, COLLECTIVE_HALF - 2);
        ctx.fillStyle = g > 128 ? "#222" : "#ddd";
        ctx.font = "10px sans-serif";
        ctx.fillText(key, gx + 6, gy + 13);
      }
    } else {
      ctx.fillStyle = "#414b5e";
      ctx.fillRect(c.x - COLLECTIVE_HALF + 2, c.y - COLLECTIVE_HALF + 2, COLLECTIVE_HALF * 2 - 4, COLLECTIVE_HALF * 2 - 4);
    }
    ctx.fillStyle = "#fff";
    ctx.font = "bold 13px sans-serif";
    ctx.fillText(c.id, c.x - 8, c.y - COLLECTIVE_HALF - 4);
  }

  // Info pop-up windows.
  for (const win of scene.windows) {
    ctx.fillStyle = "rgba(90,96,110,0.95)";
    ctx.fillRect(win.x, win.y, win.w, win.h);
    ctx.strokeStyle = "#cfd6e4";
    ctx.strokeRect(win.x, win.y, win.w, win.h);
    ctx.fillStyle = "#fff";
    ctx.font = "12px sans-serif";
    const snapshot = console_.snapshot;
    let lines: string[] = [`${win.entityKind} ${win.entityId}`];
    if (snapshot && win.entityKind === "target") {
      for (const c of snapshot.collectives) {
        const n = c.support[win.entityId] ?? 0;
        lines.push(`${c.id}: ${n} supporting (${((100 * n) / 200).toFixed(0)}%)`);
      }
    } else if (snapshot) {
      const c = snapshot.collectives.find((x) => x.id === win.entityId);
      if (c) {
        lines.push(`U=${c.counts.U} F=${c.counts.F}`);
        lines.push(`C=${c.counts.C} X=${c.counts.X}`);
        lines.push(`decisions: ${c.decisions}`);
      }
    }
    lines.forEach((line, i) => ctx.fillText(line, win.x + 8, win.y + 18 + i * 16));
  }

  // Request area with command buttons.
  const req = scene.regions.request;
  ctx.fillStyle = "#161c28";
  ctx.fillRect(req.x, req.y, req.w, req.h);
  ctx.fillStyle = "#9fb0c8";
  ctx.font = "bold 14px sans-serif";
  ctx.fillText("Collective request area", req.x + 20, req.y + 28);
  ctx.font = "12px sans-serif";
  ctx.fillText(
    `selection: ${console_.selectedCollective ?? "-"} / target ${console_.selectedTarget ?? "-"}`,
    req.x + 20,
    req.y + 48,
  );
  for (const b of commandButtons(scene)) {
    ctx.fillStyle = scene.commandButtonsEnabled ? "#2f6db3" : "#2a3242";
    ctx.fillRect(b.rect.x, b.rect.y, b.rect.w, b.rect.h);
    ctx.fillStyle = "#fff";
    ctx.fillText(b.label, b.rect.x + 14, b.rect.y + 28);
  }

  // Monitor area: assignments log + system messages.
  const mon = scene.regions.monitor;
  ctx.fillStyle = "#161c28";
  ctx.fillRect(mon.x, mon.y, mon.w, mon.h);
  ctx.fillStyle = "#9fb0c8";
  ctx.font = "bold 14px sans-serif";
  ctx.fillText("Collective assignments", mon.x + 16, mon.y + 26);
  ctx.font = "12px sans-serif";
  scene.assignments.slice(-14).forEach((a, i) => {
    ctx.fillStyle = a.status === "complete" ? "#d7263d" : "#3fa34d";
    ctx.beginPath();
    ctx.arc(mon.x + 24, mon.y + 46 + i * 20, 5, 0, Math.PI * 2);
    ctx.fill();
    ctx.fillStyle = "#e8edf5";
    ctx.fillText(
      `Collective ${a.coll}: ${a.kind} Target ${a.target}` + (a.kind === "investigate" ? ` (${a.acks}/10)` : ""),
      mon.x + 38,
      mon.y + 50 + i * 20,
    );
  });
  ctx.fillStyle = "#9fb0c8";
  ctx.font = "bold 14px sans-serif";
  ctx.fillText("System messages", mon.x + 16, mon.y + 560);
  ctx.font = "12px sans-serif";
  ctx.fillStyle = "#e8edf5";
  scene.messages.slice(-12).forEach((m, i) => {
    ctx.fillText(m.slice(0, 52), mon.x + 16, mon.y + 584 + i * 18);
  });

  // Legend.
  drawLegend(ctx, scene);

  // Probe overlay.
  if (console_.activeProbe) {
    const p = console_.activeProbe.payload;
    ctx.fillStyle = "rgba(20,24,34,0.92)";
    ctx.fillRect(CANVAS_W / 2 - 330, 40, 660, 110);
    ctx.strokeStyle = "#e6c229";
    ctx.strokeRect(CANVAS_W / 2 - 330, 40, 660, 110);
    ctx.fillStyle = "#fff";
    ctx.font = "bold 14px sans-serif";
    ctx.fillText(`Probe ${p.probe} (${p.level})`, CANVAS_W / 2 - 310, 68);
    ctx.font = "13px sans-serif";
    ctx.fillText(p.text, CANVAS_W / 2 - 310, 94);
    ctx.fillStyle = "#9fb0c8";
    ctx.fillText(
      p.answer_kind === "bool" ? "press y / n" : "type answer in prompt (click overlay)",
      CANVAS_W / 2 - 310,
      120,
    );
  }
}

function drawTarget(ctx: CanvasRenderingContext2D, t: TargetIcon, mode: ViewMode): void {
  const h = TARGET_HALF;
  if (mode === "collective") {
    // Two sections: green value on top, blue support below.
    ctx.fillStyle = t.assessed ? `rgba(63,163,77,${t.fillOpacity})` : "#e8edf5";
    ctx.fillRect(t.x - h, t.y - h, h * 2, h);
    ctx.fillStyle = `rgba(47,109,179,${t.supportOpacity})`;
    ctx.fillRect(t.x - h, t.y, h * 2, h);
  } else {
    ctx.fillStyle = t.assessed ? `rgba(63,163,77,${t.fillOpacity})` : "#e8edf5";
    ctx.fillRect(t.x - h, t.y - h, h * 2, h * 2);
  }
  if (t.outline !== "none") {
    ctx.strokeStyle = OUTLINE_COLORS[t.outline];
    ctx.lineWidth = t.selected ? 4 : 2.5;
    ctx.strokeRect(t.x - h - 2, t.y - h - 2, h * 2 + 4, h * 2 + 4);
  }
  ctx.fillStyle = "#fff";
  ctx.font = "11px sans-serif";
  ctx.fillText(String(t.id), t.x + h - 6, t.y - h - 3);
}

function drawLegend(ctx: CanvasRenderingContext2D, scene: Scene): void {
  const entries = scene.legend.entries;
  const w = 250;
  const h = 20 * entries.length + 34;
  const map = scene.regions.map;
  const x = scene.legend.corner === "lower-right" ? map.x + map.w - w - 12 : map.x + 12;
  const y = scene.legend.corner === "lower-right" ? map.y + map.h - h - 12 : map.y + 12;
  ctx.fillStyle = "rgba(16,20,28,0.85)";
  ctx.fillRect(x, y, w, h);
  ctx.fillStyle = "#9fb0c8";
  ctx.font = "bold 13px sans-serif";
  ctx.fillText("Legend", x + 10, y + 20);
  ctx.font = "12px sans-serif";
  entries.forEach((e, i) => {
    ctx.fillStyle = e.swatch;
    ctx.fillRect(x + 10, y + 30 + i * 20, 12, 12);
    ctx.fillStyle = "#e8edf5";
    ctx.fillText(e.label, x + 30, y + 40 + i * 20);
  });
}
