import init, { solveGame, simulate, lambdaSweep } from "./pkg/switchgame_web.js";

const PAPER = {
  n: 2, m: 2, T: 15,
  A: [[0.4, 0.8], [-0.8, 1.0]],
  B1: [[1, 0], [0, 1]], B2: [[-1, 0], [0, -1]],
  S: [[0.25, 0], [0, 0.25]], Sigma0: [[0, 0], [0, 0]],
  Q1: [[0.3, 0], [0, 0.7]], Q2: [[0.8, 0], [0, 0.2]],
  Q11: [[1, 0], [0, 1]], Q22: [[1, 0], [0, 1]],
  Q12: [[0, 0], [0, 0]], Q21: [[0, 0], [0, 0]],
  lambda1: 1, lambda2: 1.5,
};

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);
const COLORS = ["#1f77b4", "#d62728", "#2ca02c"];

function report(err) {
  $("status").textContent = String(err.message ?? err);
  $("status").className = "err";
}

function frame(ctx, xs, ys) {
  const { width: w, height: h } = ctx.canvas;
  const pad = 40;
  const [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  let [y0, y1] = [Math.min(0, ...ys), Math.max(...ys)];
  if (y1 === y0) y1 = y0 + 1;
  const sx = (x) => pad + ((x - x0) / (x1 - x0 || 1)) * (w - 2 * pad);
  const sy = (y) => h - pad + ((y0 - y) / (y1 - y0)) * (h - 2 * pad);
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#999";
  ctx.fillStyle = "#444";
  ctx.font = "11px sans-serif";
  ctx.beginPath();
  ctx.moveTo(pad, pad / 2);
  ctx.lineTo(pad, h - pad);
  ctx.lineTo(w - pad / 2, h - pad);
  ctx.stroke();
  ctx.fillText(y1.toPrecision(3), 2, sy(y1) + 4);
  ctx.fillText(y0.toPrecision(3), 2, sy(y0));
  for (let x = x0; x <= x1; x++) ctx.fillText(String(x), sx(x) - 3, h - pad + 14);
  return { sx, sy };
}

function line(ctx, { sx, sy }, ys, color, dashed) {
  ctx.strokeStyle = color;
  ctx.setLineDash(dashed ? [5, 4] : []);
  ctx.beginPath();
  ys.forEach((y, k) => (k ? ctx.lineTo(sx(k), sy(y)) : ctx.moveTo(sx(k), sy(y))));
  ctx.stroke();
  ctx.setLineDash([]);
}

function marks(ctx, { sx }, schedule) {
  ctx.fillStyle = "rgba(0,0,0,0.08)";
  schedule.forEach((d, k) => d && ctx.fillRect(sx(k) - 4, 0, 8, ctx.canvas.height - 40));
}

function config() {
  return $("config").value;
}

function runSolve() {
  const v = JSON.parse(solveGame(config(), num("lambda1"), num("lambda2")));
  const ctx = $("values").getContext("2d");
  const ks = v.schedule.map((_, k) => k);
  const all = [...v.equilibrium.v1, ...v.equilibrium.v2, ...v.open.v1, ...v.open.v2];
  const f = frame(ctx, ks, all);
  marks(ctx, f, v.schedule);
  line(ctx, f, v.equilibrium.v1, COLORS[0], false);
  line(ctx, f, v.equilibrium.v2, COLORS[1], false);
  line(ctx, f, v.open.v1, COLORS[0], true);
  line(ctx, f, v.open.v2, COLORS[1], true);
  $("solve-out").textContent =
    `closures at k = [${v.closures.join(", ")}]\n` +
    `V1(0) = ${v.equilibrium.v1[0].toFixed(6)}  (never close: ${v.open.v1[0].toFixed(6)}, ratio ${v.ratio[0].toFixed(4)})\n` +
    `V2(0) = ${v.equilibrium.v2[0].toFixed(6)}  (never close: ${v.open.v2[0].toFixed(6)}, ratio ${v.ratio[1].toFixed(4)})\n` +
    `social loss at the root: ${v.social_loss.toExponential(3)}`;
}

function runSimulate() {
  const v = JSON.parse(simulate(config(), num("lambda1"), num("lambda2"), num("seed"), num("runs")));
  const t = v.trajectory;
  const ctx = $("trajectory").getContext("2d");
  const ks = t.delta.map((_, k) => k);
  const series = [];
  for (let i = 0; i < t.x[0].length; i++) {
    series.push([t.x.map((x) => x[i]), t.xhat.map((x) => x[i]), COLORS[i % COLORS.length]]);
  }
  const f = frame(ctx, ks, series.flatMap(([x, xh]) => [...x, ...xh]));
  // a zero line, since states are signed
  line(ctx, f, ks.map(() => 0), "#ccc", false);
  marks(ctx, f, t.delta);
  for (const [x, xh, c] of series) {
    line(ctx, f, x, c, false);
    line(ctx, f, xh, c, true);
  }
  $("sim-out").textContent =
    `first run: state (solid) and estimate (dashed)\n` +
    `${v.runs} runs, ${v.closures} closures per run\n` +
    `player 1: mean ${v.mean[0].toFixed(4)} ± ${v.se[0].toFixed(4)}, analytic ${v.analytic[0].toFixed(4)}\n` +
    `player 2: mean ${v.mean[1].toFixed(4)} ± ${v.se[1].toFixed(4)}, analytic ${v.analytic[1].toFixed(4)}`;
}

function runSweep() {
  const v = JSON.parse(lambdaSweep(config(), num("lmax"), num("steps")));
  const ctx = $("grid").getContext("2d");
  const n = v.lambdas.length;
  const cell = ctx.canvas.width / n;
  const max = Math.max(1, ...v.closures.flat());
  ctx.clearRect(0, 0, ctx.canvas.width, ctx.canvas.height);
  ctx.font = `${Math.max(8, Math.min(14, cell / 2))}px sans-serif`;
  ctx.textAlign = "center";
  for (let i = 0; i < n; i++) {
    for (let j = 0; j < n; j++) {
      const c = v.closures[i][j];
      const shade = Math.round(255 - (200 * c) / max);
      ctx.fillStyle = `rgb(${shade},${shade},255)`;
      ctx.fillRect(j * cell, i * cell, cell, cell);
      ctx.fillStyle = "#000";
      ctx.fillText(String(c), j * cell + cell / 2, i * cell + cell / 2 + 4);
    }
  }
}

function guarded(fn) {
  return () => {
    $("status").textContent = "";
    $("status").className = "";
    try {
      fn();
    } catch (e) {
      report(e);
    }
  };
}

await init();
$("config").value = JSON.stringify(PAPER, null, 1);
$("solve").onclick = guarded(runSolve);
$("simulate").onclick = guarded(runSimulate);
$("sweep").onclick = guarded(runSweep);
guarded(runSolve)();
