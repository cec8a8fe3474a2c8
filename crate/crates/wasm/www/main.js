import init, { breakdown_landscape, filter_demo, kl_projection } from "./pkg/quasigrad_wasm.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function call(out, f) {
  $(out).classList.remove("err");
  try {
    return JSON.parse(f());
  } catch (e) {
    $(out).classList.add("err");
    $(out).textContent = String(e.message ?? e);
    return null;
  }
}

function frame(canvas, xs, ys, pad = 30) {
  const [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  const [y0, y1] = [Math.min(...ys), Math.max(...ys)];
  const sx = (canvas.width - 2 * pad) / (x1 - x0 || 1);
  const sy = (canvas.height - 2 * pad) / (y1 - y0 || 1);
  return {
    x: (v) => pad + (v - x0) * sx,
    y: (v) => canvas.height - pad - (v - y0) * sy,
  };
}

function cross(ctx, x, y, color, label) {
  ctx.strokeStyle = color;
  ctx.lineWidth = 3;
  ctx.beginPath();
  ctx.moveTo(x - 8, y - 8); ctx.lineTo(x + 8, y + 8);
  ctx.moveTo(x - 8, y + 8); ctx.lineTo(x + 8, y - 8);
  ctx.stroke();
  ctx.fillStyle = color;
  ctx.fillText(label, x + 10, y - 10);
}

function runFilter() {
  const r = call("f-out", () => filter_demo(num("f-n"), num("f-eps"), num("f-dist"), num("f-seed")));
  if (!r) return;
  const canvas = $("f-canvas");
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const t = frame(canvas, r.points.map((p) => p[0]), r.points.map((p) => p[1]));
  const wmax = Math.max(...r.weights);
  r.points.forEach(([x, y], i) => {
    ctx.fillStyle = r.good[i] ? "#2a6fdb" : "#d9480f";
    ctx.globalAlpha = r.weights[i] > 0 ? 0.25 + 0.75 * r.weights[i] / wmax : 0.12;
    ctx.beginPath();
    ctx.arc(t.x(x), t.y(y), r.weights[i] > 0 ? 3 : 2, 0, 2 * Math.PI);
    ctx.fill();
  });
  ctx.globalAlpha = 1;
  ctx.font = "13px sans-serif";
  cross(ctx, t.x(r.sample_mean[0]), t.y(r.sample_mean[1]), "#888", "sample mean");
  cross(ctx, t.x(r.good_mean[0]), t.y(r.good_mean[1]), "#2a6fdb", "good mean");
  cross(ctx, t.x(r.filtered_mean[0]), t.y(r.filtered_mean[1]), "#111", "filtered");
  const err = (m) => Math.hypot(m[0] - r.good_mean[0], m[1] - r.good_mean[1]).toFixed(4);
  const removed = r.weights.filter((w) => w === 0).length;
  $("f-out").textContent =
    `iterations ${r.iterations}, points removed ${removed}, threshold ${r.threshold.toFixed(3)}\n` +
    `objective per iteration: ${r.objectives.map((v) => v.toFixed(3)).join(" → ")}\n` +
    `distance to good mean: sample ${err(r.sample_mean)}, filtered ${err(r.filtered_mean)}`;
}

function runBreakdown() {
  const r = call("b-out", () => breakdown_landscape(num("b-eps"), num("b-amax"), 200));
  if (!r) return;
  const canvas = $("b-canvas");
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const xs = r.points.map((p) => p.a);
  const ys = r.points.map((p) => p.violation);
  const t = frame(canvas, xs, ys.concat([0]));
  ctx.strokeStyle = "#ccc";
  ctx.beginPath();
  ctx.moveTo(t.x(xs[0]), t.y(0)); ctx.lineTo(t.x(xs[xs.length - 1]), t.y(0));
  ctx.stroke();
  r.points.forEach((p) => {
    ctx.fillStyle = p.stationary ? "#2b8a3e" : "#c92a2a";
    ctx.fillRect(t.x(p.a) - 2, t.y(p.violation) - 2, 4, 4);
  });
  if (r.critical_a !== null && r.critical_a <= xs[xs.length - 1]) {
    ctx.strokeStyle = "#555";
    ctx.setLineDash([4, 4]);
    ctx.beginPath();
    ctx.moveTo(t.x(r.critical_a), 10); ctx.lineTo(t.x(r.critical_a), canvas.height - 10);
    ctx.stroke();
    ctx.setLineDash([]);
  }
  const first = r.points.find((p) => !p.stationary);
  $("b-out").textContent =
    `first-order violation against a (green: stationary, red: not)\n` +
    `critical a: ${r.critical_a === null ? "none, stationary for every a" : r.critical_a.toFixed(6)}; ` +
    `first non-stationary grid point: ${first ? first.a.toFixed(4) : "none"}`;
}

function runProjection() {
  const weights = $("k-w").value.split(",").map((s) => Number(s.trim())).filter((v) => !Number.isNaN(v));
  const r = call("k-out", () => kl_projection(new Float64Array(weights), num("k-eps")));
  if (!r) return;
  const canvas = $("k-canvas");
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const n = r.input.length;
  const top = Math.max(...r.input, r.cap) * 1.1;
  const h = canvas.height - 30;
  const w = (canvas.width - 20) / n;
  const y = (v) => 10 + h * (1 - v / top);
  for (let i = 0; i < n; i++) {
    ctx.fillStyle = "#adb5bd";
    ctx.fillRect(10 + i * w + 2, y(r.input[i]), w / 2 - 3, h - y(r.input[i]) + 10);
    ctx.fillStyle = "#2a6fdb";
    ctx.fillRect(10 + i * w + w / 2, y(r.projected[i]), w / 2 - 3, h - y(r.projected[i]) + 10);
  }
  ctx.strokeStyle = "#c92a2a";
  ctx.setLineDash([4, 4]);
  ctx.beginPath();
  ctx.moveTo(10, y(r.cap)); ctx.lineTo(canvas.width - 10, y(r.cap));
  ctx.stroke();
  ctx.setLineDash([]);
  $("k-out").textContent =
    `grey: input, blue: projection, dashed: cap ${r.cap.toFixed(4)}\n` +
    `projected: ${r.projected.map((v) => v.toFixed(4)).join(", ")}\nKL(q‖p) = ${r.kl.toExponential(4)}`;
}

await init();
$("f-run").onclick = runFilter;
$("b-run").onclick = runBreakdown;
$("k-run").onclick = runProjection;
runFilter();
runBreakdown();
runProjection();
