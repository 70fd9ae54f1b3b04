import init, { analytic_patterns, speckle_scan, hbt_histogram } from "./pkg/twophoton_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function plot(canvas, series, opts = {}) {
  const ctx = canvas.getContext("2d");
  const w = canvas.width, h = canvas.height, pad = 40;
  ctx.clearRect(0, 0, w, h);
  const xs = series.flatMap((s) => s.x);
  const ys = series.flatMap((s) => s.y.concat(s.err ? s.y.map((v, i) => v + s.err[i]) : []));
  const x0 = Math.min(...xs), x1 = Math.max(...xs);
  const y0 = opts.ymin ?? Math.min(0, ...ys), y1 = opts.ymax ?? Math.max(...ys) * 1.05;
  const px = (x) => pad + ((x - x0) / (x1 - x0)) * (w - 2 * pad);
  const py = (y) => h - pad - ((y - y0) / (y1 - y0)) * (h - 2 * pad);

  ctx.strokeStyle = "#999";
  ctx.fillStyle = "#444";
  ctx.font = "12px sans-serif";
  ctx.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  ctx.fillText(x0.toPrecision(3), pad, h - pad + 15);
  ctx.fillText(x1.toPrecision(3), w - pad - 30, h - pad + 15);
  ctx.fillText(y0.toPrecision(3), 2, h - pad);
  ctx.fillText(y1.toPrecision(3), 2, pad + 10);
  if (opts.xlabel) ctx.fillText(opts.xlabel, w / 2 - 20, h - 8);

  for (const s of series) {
    ctx.strokeStyle = ctx.fillStyle = s.color;
    if (s.points) {
      s.x.forEach((x, i) => {
        ctx.beginPath();
        ctx.arc(px(x), py(s.y[i]), 3, 0, 2 * Math.PI);
        ctx.fill();
        if (s.err) {
          ctx.beginPath();
          ctx.moveTo(px(x), py(s.y[i] - s.err[i]));
          ctx.lineTo(px(x), py(s.y[i] + s.err[i]));
          ctx.stroke();
        }
      });
    } else {
      ctx.beginPath();
      s.x.forEach((x, i) => (i ? ctx.lineTo(px(x), py(s.y[i])) : ctx.moveTo(px(x), py(s.y[i]))));
      ctx.stroke();
    }
  }
}

function geometry() {
  return [num("a"), num("d"), num("z"), num("lambda")];
}

function show(id, text, error = false) {
  $(id).textContent = text;
  $(id).classList.toggle("error", error);
}

function updatePatterns() {
  for (const id of ["a", "d", "z", "lambda"]) $(`${id}-out`).textContent = $(id).value;
  try {
    const r = JSON.parse(analytic_patterns(...geometry(), 12, 1201));
    plot($("patterns-plot"), [
      { x: r.u_mm, y: r.first_order, color: "#7f8c8d" },
      { x: r.u_mm, y: r.spdc, color: "#2471a3" },
      { x: r.u_mm, y: r.thermal, color: "#c0392b" },
    ], { ymin: 0, ymax: 2.1, xlabel: "u (mm)" });
    const v = (x) => (x == null ? "n/a" : x.toFixed(4));
    show("patterns-info", `visibility: thermal ${v(r.visibility_thermal)}, SPDC ${v(r.visibility_spdc)}`);
  } catch (e) {
    show("patterns-info", String(e), true);
  }
}

function runSpeckle() {
  show("speckle-info", "running…");
  setTimeout(() => {
    try {
      const t = performance.now();
      const r = JSON.parse(speckle_scan(...geometry(), 12, num("points"), num("realizations"), BigInt(num("speckle-seed"))));
      plot($("speckle-plot"), [
        { x: r.u_mm, y: r.closed_form, color: "#c0392b" },
        { x: r.u_mm, y: r.value, err: r.std_error.map((e) => 3 * e), color: "#222", points: true },
      ], { ymin: 0.8, ymax: 2.2, xlabel: "x1 − x2 (mm)" });
      const inside = r.value.filter((v, i) => Math.abs(v - r.closed_form[i]) < 3 * r.std_error[i]).length;
      show("speckle-info", `${inside}/${r.value.length} points within 3σ of the closed form (${((performance.now() - t) / 1000).toFixed(1)} s)`);
    } catch (e) {
      show("speckle-info", String(e), true);
    }
  }, 10);
}

function runHbt() {
  for (const id of ["tau", "duration"]) $(`${id}-out`).textContent = $(id).value;
  show("hbt-info", "running…");
  setTimeout(() => {
    try {
      const tau = num("tau");
      const r = JSON.parse(hbt_histogram(tau, 45000, 25000, num("duration"), tau / 20, BigInt(num("hbt-seed"))));
      plot($("hbt-plot"), [{ x: r.tau_ns, y: r.g2, color: "#c0392b" }], { ymin: 0.5, ymax: 2.5, xlabel: "τ (ns)" });
      const f = (x, d) => (x == null ? "n/a" : x.toFixed(d));
      show("hbt-info", `g2(0) = ${f(r.g2_zero, 3)}, fitted τc = ${f(r.decay_ns, 1)} ns, singles ${r.singles.map((s) => s.toFixed(0)).join(" / ")} s⁻¹`);
    } catch (e) {
      show("hbt-info", String(e), true);
    }
  }, 10);
}

await init();
for (const id of ["a", "d", "z", "lambda"]) $(id).addEventListener("input", updatePatterns);
for (const id of ["tau", "duration"]) $(id).addEventListener("input", () => ($(`${id}-out`).textContent = $(id).value));
$("speckle-run").addEventListener("click", runSpeckle);
$("hbt-run").addEventListener("click", runHbt);
updatePatterns();
runHbt();
