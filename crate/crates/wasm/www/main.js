import init, { actionDistribution, regretCurves, ensembleSizeBound } from "./pkg/ensemble_sampling_wasm.js";

const COLORS = ["#222", "#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
const num = (id) => Number(document.getElementById(id).value);

function guard(outId, fn) {
  const out = document.getElementById(outId);
  try {
    out.classList.remove("err");
    fn(out);
  } catch (e) {
    out.classList.add("err");
    out.textContent = String(e.message ?? e);
  }
}

function clear(canvas) {
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.font = "11px sans-serif";
  return ctx;
}

function bars(canvas, series, labels) {
  const ctx = clear(canvas);
  const pad = 30, n = series[0].length;
  const h = canvas.height - 2 * pad, w = (canvas.width - 2 * pad) / n;
  const top = Math.max(...series.flat(), 1e-9);
  series.forEach((s, k) => {
    ctx.fillStyle = COLORS[k + 1];
    s.forEach((v, i) => {
      const bh = (v / top) * h;
      ctx.fillRect(pad + i * w + k * (w / series.length), pad + h - bh, w / series.length - 1, bh);
    });
  });
  labels.forEach((l, k) => {
    ctx.fillStyle = COLORS[k + 1];
    ctx.fillText(l, pad + k * 120, 14);
  });
}

function lines(canvas, curves, logY = false) {
  const ctx = clear(canvas);
  const pad = 30, h = canvas.height - 2 * pad, w = canvas.width - 2 * pad;
  const tf = (v) => (logY ? Math.log10(Math.max(v, 1e-300)) : v);
  const ys = curves.flatMap((c) => c.ys.map(tf));
  const xs = curves.flatMap((c) => c.xs);
  const [y0, y1] = [Math.min(...ys), Math.max(...ys)];
  const [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  const px = (x) => pad + ((x - x0) / (x1 - x0 || 1)) * w;
  const py = (y) => pad + h - ((tf(y) - y0) / (y1 - y0 || 1)) * h;
  curves.forEach((c, k) => {
    ctx.strokeStyle = ctx.fillStyle = COLORS[k % COLORS.length];
    ctx.beginPath();
    c.xs.forEach((x, i) => (i ? ctx.lineTo(px(x), py(c.ys[i])) : ctx.moveTo(px(x), py(c.ys[i]))));
    ctx.stroke();
    ctx.fillText(c.label, pad + k * 90, 14);
  });
  ctx.fillStyle = "#666";
  ctx.fillText(logY ? `1e${y1.toFixed(0)}` : y1.toFixed(3), 2, pad);
  ctx.fillText(logY ? `1e${y0.toFixed(0)}` : y0.toFixed(3), 2, pad + h);
}

function smooth(ys, k) {
  return ys.map((_, i) => {
    const lo = Math.max(0, i - k);
    const win = ys.slice(lo, i + 1);
    return win.reduce((a, b) => a + b, 0) / win.length;
  });
}

function runDist() {
  guard("dist-out", (out) => {
    const d = JSON.parse(actionDistribution(num("dist-arms"), num("dist-pulls"), num("dist-models"), num("dist-seed")));
    bars(document.getElementById("dist-plot"), [d.exact, d.ensemble], ["exact p", "ensemble p̂"]);
    out.textContent = `KL(p̂‖p) = ${d.kl.toFixed(5)}   ‖p̂ − p‖₁ = ${d.tv.toFixed(5)}`;
  });
}

function runRegret() {
  guard("reg-out", (out) => {
    const models = Uint32Array.from(document.getElementById("reg-models").value.split(",").map((s) => Number(s.trim())).filter((m) => m > 0));
    const t0 = performance.now();
    const curves = JSON.parse(regretCurves(num("reg-arms"), num("reg-horizon"), num("reg-reals"), models, num("reg-seed")));
    const window = Math.max(1, Math.floor(num("reg-horizon") / 50));
    lines(document.getElementById("reg-plot"), curves.map((c) => ({
      label: c.label,
      xs: c.mean.map((_, t) => t),
      ys: smooth(c.mean, window),
    })));
    out.textContent = curves.map((c) => `${c.label.padEnd(8)} cumulative ${c.cumulative.toFixed(2)}`).join("\n")
      + `\n(${(performance.now() - t0).toFixed(0)} ms)`;
  });
}

function runBound() {
  guard("b-out", (out) => {
    const b = JSON.parse(ensembleSizeBound(num("b-actions"), num("b-horizon"), num("b-eps")));
    lines(document.getElementById("b-plot"), [{
      label: "tail bound",
      xs: b.concentration.map(([m]) => m),
      ys: b.concentration.map(([, p]) => p),
    }], true);
    out.textContent = `M = ${b.models}` + (b.assumption_holds ? "" : "  (A·T/(ε·ε/2) < 9: the guarantee does not apply)");
  });
}

await init();
document.getElementById("dist-run").onclick = runDist;
document.getElementById("reg-run").onclick = runRegret;
document.getElementById("b-run").onclick = runBound;
runDist();
runBound();
