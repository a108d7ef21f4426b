import init, { rate_constant, design, monte_carlo } from "./pkg/surprise_web.js";

const $ = (id) => document.getElementById(id);
const OBJECTIVES = ["lcc", "prediction", "mse", "direction"];

function call(fn, ...args) {
  const v = JSON.parse(fn(...args));
  if (v.error) throw new Error(v.error);
  return v;
}

function show(el, text, isError = false) {
  el.textContent = text;
  el.classList.toggle("error", isError);
}

function canvas(id) {
  const c = $(id);
  const ratio = window.devicePixelRatio || 1;
  c.width = c.clientWidth * ratio;
  c.height = c.clientHeight * ratio;
  const ctx = c.getContext("2d");
  ctx.scale(ratio, ratio);
  ctx.clearRect(0, 0, c.clientWidth, c.clientHeight);
  return { ctx, w: c.clientWidth, h: c.clientHeight };
}

// 1. Sorted kernels as bars, the capped probabilities drawn over them.
function drawRate() {
  const el = $("rate-out");
  const r = Number($("rate-r").value);
  $("rate-r-val").textContent = r.toFixed(2);
  const kernels = $("kernels").value.split(/[\s,]+/).filter(Boolean).map(Number);
  let v;
  try {
    v = call(rate_constant, Float64Array.from(kernels), r);
  } catch (e) {
    show(el, e.message, true);
    return;
  }
  const order = kernels.map((k, i) => [k, i]).sort((a, b) => a[0] - b[0]).map(([, i]) => i);
  const { ctx, w, h } = canvas("rate-canvas");
  const pad = 24, bw = (w - 2 * pad) / kernels.length;
  const kmax = Math.max(...kernels);
  order.forEach((i, pos) => {
    const x = pad + pos * bw;
    const kh = (kernels[i] / kmax) * (h - 2 * pad);
    ctx.fillStyle = "#cfd8e3";
    ctx.fillRect(x + 1, h - pad - kh, bw - 2, kh);
    const ph = v.probs[i] * (h - 2 * pad);
    ctx.fillStyle = v.probs[i] >= 1 ? "#d9534f" : "#3366cc";
    ctx.fillRect(x + bw * 0.3, h - pad - ph, bw * 0.4, ph);
  });
  ctx.strokeStyle = "#999";
  ctx.beginPath();
  ctx.moveTo(pad, pad);
  ctx.lineTo(w - pad, pad);
  ctx.stroke();
  ctx.fillStyle = "#666";
  ctx.fillText("π = 1", 2, pad + 4);
  const c = v.c === null ? "∞ (every positive kernel fits)" : v.c.toPrecision(6);
  show(el, `c = ${c}\ncapped rows = ${v.capped}\nexpected size = ${v.expected_size.toFixed(3)} of budget ${v.budget.toFixed(3)}\n` +
    "grey: kernel (scaled), blue: probability, red: capped at 1");
}

function randomKernels() {
  const n = 20 + Math.floor(Math.random() * 30);
  const ks = Array.from({ length: n }, () => (Math.random() < 0.15 ? 0 : Math.exp(2 * (Math.random() - 0.5) * 2)));
  $("kernels").value = ks.map((k) => k.toFixed(2)).join(" ");
  drawRate();
}

function scaler(values, lo, hi) {
  const min = Math.min(...values), max = Math.max(...values);
  return (v) => lo + ((v - min) / (max - min || 1)) * (hi - lo);
}

// 2. Covariates coloured by response; drawn rows ringed, radius by probability.
function drawDesign() {
  const el = $("design-out");
  let v;
  try {
    v = call(design, $("design-obj").value, Number($("design-r").value), Number($("design-n").value), Number($("design-seed").value));
  } catch (e) {
    show(el, e.message, true);
    return;
  }
  const { ctx, w, h } = canvas("design-canvas");
  const sx = scaler(v.x1, 10, w - 10), sy = scaler(v.x2, h - 10, 10);
  ctx.globalAlpha = 0.25;
  for (let i = 0; i < v.x1.length; i++) {
    ctx.fillStyle = v.y[i] === 1 ? "#d9534f" : "#888";
    ctx.fillRect(sx(v.x1[i]) - 1, sy(v.x2[i]) - 1, 2, 2);
  }
  ctx.globalAlpha = 1;
  ctx.lineWidth = 1.2;
  for (const i of v.drawn) {
    ctx.strokeStyle = v.y[i] === 1 ? "#b52b27" : "#3366cc";
    ctx.beginPath();
    ctx.arc(sx(v.x1[i]), sy(v.x2[i]), 2 + 5 * v.probs[i], 0, 2 * Math.PI);
    ctx.stroke();
  }
  const cases = v.y.filter((y) => y === 1).length;
  const drawnCases = v.drawn.filter((i) => v.y[i] === 1).length;
  show(el, `pilot θ̃ = (${v.pilot.map((t) => t.toFixed(3)).join(", ")}), c = ${v.c.toPrecision(5)}\n` +
    `drawn ${v.drawn.length} of ${v.x1.length} rows; cases ${drawnCases} of ${cases}`);
}

function histogram(ctx, values, color, x0, x1, y0, y1, bins, lo, hi, peak) {
  const counts = new Array(bins).fill(0);
  for (const v of values) {
    const b = Math.floor(((v - lo) / (hi - lo)) * bins);
    if (b >= 0 && b < bins) counts[b]++;
  }
  const bw = (x1 - x0) / bins;
  ctx.fillStyle = color;
  counts.forEach((c, b) => {
    const bh = (c / peak) * (y1 - y0);
    ctx.fillRect(x0 + b * bw + 1, y1 - bh, bw - 2, bh);
  });
}

// 3. Two histograms on a shared axis with the true slope marked.
function drawMonteCarlo() {
  const el = $("mc-out");
  show(el, "running…");
  // Let the status paint before the synchronous run blocks the page.
  setTimeout(() => {
    let v;
    try {
      v = call(monte_carlo, $("mc-obj").value, Number($("mc-r").value), Number($("mc-n").value), Number($("mc-reps").value), 7);
    } catch (e) {
      show(el, e.message, true);
      return;
    }
    const all = v.ht.concat(v.uniform);
    const lo = Math.min(...all), hi = Math.max(...all) + 1e-12;
    const bins = 30;
    const peakOf = (xs) => {
      const c = new Array(bins).fill(0);
      xs.forEach((x) => c[Math.min(bins - 1, Math.floor(((x - lo) / (hi - lo)) * bins))]++);
      return Math.max(...c);
    };
    const peak = Math.max(peakOf(v.ht), peakOf(v.uniform));
    const { ctx, w, h } = canvas("mc-canvas");
    const mid = h / 2;
    histogram(ctx, v.ht, "#3366cc", 20, w - 20, 10, mid - 5, bins, lo, hi, peak);
    histogram(ctx, v.uniform, "#999", 20, w - 20, mid + 5, h - 10, bins, lo, hi, peak);
    const tx = 20 + ((v.truth - lo) / (hi - lo)) * (w - 40);
    ctx.strokeStyle = "#d9534f";
    ctx.beginPath();
    ctx.moveTo(tx, 0);
    ctx.lineTo(tx, h);
    ctx.stroke();
    ctx.fillStyle = "#333";
    ctx.fillText("HT", 2, 20);
    ctx.fillText("uniform", 2, mid + 20);
    show(el, `Var(HT) = ${v.ht_variance.toExponential(3)}, Var(uniform) = ${v.uniform_variance.toExponential(3)}, ratio = ${v.variance_ratio.toFixed(3)}\n` +
      `HT 95% coverage = ${v.coverage.toFixed(1)}%, mean subsample = ${v.mean_subsample.toFixed(1)}, failed reps = ${v.failures}`);
  }, 20);
}

await init();
for (const sel of document.querySelectorAll(".objective")) {
  for (const o of OBJECTIVES) sel.add(new Option(o, o));
}
$("kernels").addEventListener("input", drawRate);
$("rate-r").addEventListener("input", drawRate);
$("rate-random").addEventListener("click", randomKernels);
$("design-go").addEventListener("click", drawDesign);
$("design-obj").addEventListener("change", drawDesign);
$("mc-go").addEventListener("click", drawMonteCarlo);
drawRate();
drawDesign();
