import init, { efficiencyCurve, estimator, simulate } from "./pkg/pima_demo.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

// series: [{ values, color }], x runs 1..len or 0..len-1
function plot(canvas, series, { fromZero = false, logY = false } = {}) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = 30;
  ctx.clearRect(0, 0, w, h);
  const tf = (v) => (logY ? Math.log10(Math.max(v, 1e-12)) : v);
  const all = series.flatMap((s) => s.values.filter((v) => v !== null).map(tf));
  const lo = logY ? Math.min(...all) : 0;
  const hi = Math.max(...all, lo + 1e-9);
  const n = Math.max(...series.map((s) => s.values.length));
  const x = (i) => pad + ((w - 2 * pad) * i) / Math.max(n - 1, 1);
  const y = (v) => h - pad - ((h - 2 * pad) * (tf(v) - lo)) / (hi - lo);

  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  ctx.fillStyle = "#444";
  ctx.fillText(logY ? `1e${hi.toFixed(1)}` : hi.toFixed(3), 2, pad);
  ctx.fillText(logY ? `1e${lo.toFixed(1)}` : lo.toFixed(3), 2, h - pad);
  ctx.fillText(String(fromZero ? 0 : 1), pad, h - 10);
  ctx.fillText(String(fromZero ? n - 1 : n), w - pad - 10, h - 10);

  for (const s of series) {
    ctx.strokeStyle = s.color;
    ctx.beginPath();
    let pen = false;
    s.values.forEach((v, i) => {
      if (v === null || (logY && v <= 0)) { pen = false; return; }
      pen ? ctx.lineTo(x(i), y(v)) : ctx.moveTo(x(i), y(v));
      pen = true;
    });
    ctx.stroke();
  }
}

function guard(out, f) {
  try {
    out.classList.remove("err");
    f();
  } catch (e) {
    out.classList.add("err");
    out.textContent = String(e.message ?? e);
  }
}

function runEfficiency() {
  guard($("eff-out"), () => {
    const r = JSON.parse(efficiencyCurve(num("eff-users"), num("eff-active")));
    plot($("eff-plot"), [
      { values: r.finite, color: "#1f77b4" },
      { values: r.unbounded, color: "#d62728" },
    ]);
    $("eff-out").textContent =
      `blue: finite N, red: unbounded\n` +
      `L2* finite = ${r.l2_finite} (eta ${r.finite[r.l2_finite - 1].toFixed(4)})\n` +
      `L2* unbounded = ${r.l2_unbounded}`;
  });
}

function runEstimator() {
  guard($("est-out"), () => {
    const r = JSON.parse(estimator(num("est-users"), num("est-p"), num("est-snr")));
    plot($("est-plot"), [
      { values: r.prior, color: "#2ca02c" },
      { values: r.error, color: "#d62728" },
    ], { fromZero: true, logY: true });
    const mode = r.prior.indexOf(Math.max(...r.prior));
    $("est-out").textContent =
      `green: prior p(b), red: P(decide != b | b), log scale\n` +
      `real-axis noise std ${r.noise_std.toFixed(4)}\n` +
      `most likely count ${mode}, its region [${r.thresholds[mode - 1] ?? "-inf"}, ${r.thresholds[mode] ?? "inf"})\n` +
      `average error ${r.error_overall.toExponential(4)}`;
  });
}

function runSimulation() {
  $("sim-out").textContent = "running...";
  // yield so the message paints before the blocking call
  setTimeout(() => guard($("sim-out"), () => {
    const t0 = performance.now();
    const r = JSON.parse(simulate(
      $("sim-scenario").value, $("sim-protocol").value,
      num("sim-load"), num("sim-frames"), num("sim-seed"),
    ));
    const fmt = (v, d = 4) => (v === null ? "-" : v.toFixed(d));
    $("sim-out").textContent =
      `${r.scenario} / ${r.protocol} at load ${r.load}  (${(performance.now() - t0).toFixed(0)} ms)\n` +
      `frame efficiency  ${fmt(r.eta_bar)} +/- ${fmt(r.eta_se)}\n` +
      `mean latency usd  ${fmt(r.d_bar_usd, 2)} +/- ${fmt(r.d_bar_se, 2)}\n` +
      `drop probability  ${fmt(r.p_drop)}\n` +
      `burst time usd    ${fmt(r.d_burst_usd, 1)}\n` +
      `frames ${r.frames}, generated ${r.generated}, delivered ${r.delivered}, dropped ${r.dropped}`;
  }), 0);
}

await init();
$("status").textContent = "";
$("eff-run").onclick = runEfficiency;
$("est-run").onclick = runEstimator;
$("sim-run").onclick = runSimulation;
runEfficiency();
runEstimator();
