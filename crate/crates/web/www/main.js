import init, { gap_curve, design_curve, bloch_points } from "./pkg/statedesign_web.js";

const $ = (id) => document.getElementById(id);

// "pi/9", "3pi/8", "3*pi/8" or a decimal
function parseAngle(s) {
  const m = s.replace(/\s+/g, "").toLowerCase().match(/^([+-]?\d*)\*?pi(?:\/(\d+))?$/);
  if (!m) return Number(s);
  const num = m[1] === "" || m[1] === "+" ? 1 : m[1] === "-" ? -1 : Number(m[1]);
  return (num * Math.PI) / (m[2] ? Number(m[2]) : 1);
}

function frame(ctx, w, h, pad) {
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad / 2, w - 1.5 * pad, h - 1.5 * pad);
}

function linePlot(canvas, xs, ys, { xLabel, yLabel, logY = false, marks = [] }) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = 50;
  frame(ctx, w, h, pad);
  const fy = logY ? (y) => Math.log10(Math.max(y, 1e-17)) : (y) => y;
  const vy = ys.map(fy);
  const [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  let [y0, y1] = [Math.min(...vy), Math.max(...vy)];
  if (y1 - y0 < 1e-12) { y0 -= 1; y1 += 1; }
  const px = (x) => pad + ((x - x0) / (x1 - x0 || 1)) * (w - 1.5 * pad);
  const py = (y) => h - pad - ((y - y0) / (y1 - y0)) * (h - 1.5 * pad);
  ctx.fillStyle = "#333";
  ctx.font = "12px sans-serif";
  ctx.fillText(xLabel, w / 2, h - 12);
  ctx.fillText(yLabel, 4, 14);
  ctx.fillText((logY ? "1e" : "") + y1.toPrecision(3), 4, pad / 2 + 10);
  ctx.fillText((logY ? "1e" : "") + y0.toPrecision(3), 4, h - pad);
  ctx.fillText(x0.toPrecision(3), pad, h - pad + 16);
  ctx.fillText(x1.toPrecision(3), w - pad, h - pad + 16);
  ctx.strokeStyle = "#ccc";
  for (const m of marks) {
    ctx.beginPath();
    ctx.moveTo(px(m), pad / 2);
    ctx.lineTo(px(m), h - pad);
    ctx.stroke();
  }
  ctx.strokeStyle = "#1f5fa8";
  ctx.beginPath();
  xs.forEach((x, i) => (i ? ctx.lineTo(px(x), py(vy[i])) : ctx.moveTo(px(x), py(vy[i]))));
  ctx.stroke();
  ctx.fillStyle = "#1f5fa8";
  xs.forEach((x, i) => ctx.fillRect(px(x) - 2, py(vy[i]) - 2, 4, 4));
}

function timed(statusId, f) {
  const status = $(statusId);
  status.textContent = "computing…";
  // let the status paint before blocking on the computation
  setTimeout(() => {
    const start = performance.now();
    try {
      const note = f();
      status.textContent = `${((performance.now() - start) / 1000).toFixed(2)} s${note ? " · " + note : ""}`;
    } catch (e) {
      status.textContent = "error: " + e;
    }
  }, 20);
}

function runGap() {
  timed("gap-status", () => {
    const pts = JSON.parse(gap_curve(+$("gap-t").value, +$("gap-k").value, +$("gap-steps").value));
    linePlot($("gap-plot"), pts.map((p) => p.g), pts.map((p) => p.gap ?? 0), {
      xLabel: "g",
      yLabel: "1 − |λ|",
      marks: [0, Math.PI / 4, Math.PI / 2],
    });
    const counts = [...new Set(pts.map((p) => p.unimodular_count))].join(", ");
    return `unimodular counts seen: ${counts}`;
  });
}

function runDesign() {
  timed("des-status", () => {
    const args = [+$("des-na").value, +$("des-t").value, parseAngle($("des-g").value), +$("des-nb").value];
    const ctx = $("des-plot");
    const curves = [1, 2, 3].map((k) => JSON.parse(design_curve(...args, k)));
    const xs = curves[1].map((p) => p.n_b);
    linePlot(ctx, xs, curves[1].map((p) => p.delta), { xLabel: "n_B", yLabel: "log10 Δ(2)", logY: true });
    const methods = [...new Set(curves.flat().map((p) => p.method))].join(", ");
    const last = curves.map((c, i) => `Δ(${i + 1}) = ${c[c.length - 1].delta.toExponential(2)}`).join(", ");
    return `${last} at n_B = ${xs[xs.length - 1]} · methods: ${methods}`;
  });
}

function runBloch() {
  timed("bl-status", () => {
    const set = JSON.parse(bloch_points(+$("bl-t").value, +$("bl-nb").value, parseAngle($("bl-g").value)));
    const canvas = $("bl-plot");
    const ctx = canvas.getContext("2d");
    const { width: w, height: h } = canvas;
    ctx.clearRect(0, 0, w, h);
    const r = h / 2 - 20;
    // two projections: x-z and x-y
    [[w / 4, "x", "z"], [(3 * w) / 4, "x", "y"]].forEach(([cx, a, b]) => {
      ctx.strokeStyle = "#999";
      ctx.beginPath();
      ctx.arc(cx, h / 2, r, 0, 2 * Math.PI);
      ctx.stroke();
      ctx.fillStyle = "#333";
      ctx.fillText(`${a}–${b}`, cx - 10, 14);
      const pmax = Math.max(...set.points.map((p) => p.p));
      for (const p of set.points) {
        ctx.fillStyle = `rgba(31,95,168,${0.15 + 0.85 * (p.p / pmax)})`;
        ctx.fillRect(cx + r * p[a] - 1.5, h / 2 - r * p[b] - 1.5, 3, 3);
      }
    });
    return `${set.points.length} states · Δ(1..3) = ${set.deltas.map((d) => d.toExponential(2)).join(", ")}`;
  });
}

await init();
$("gap-run").onclick = runGap;
$("des-run").onclick = runDesign;
$("bl-run").onclick = runBloch;
runBloch();
