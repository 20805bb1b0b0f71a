import init, { Explorer, gmmField } from "./pkg/fusegraph_demo.js";

const $ = (id) => document.getElementById(id);
const PALETTE = ["#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac", "#86bcb6", "#d37295"];

let explorer = null;
let trace = null;

function status(msg) { $("status").textContent = msg; }

function knobs() {
  return {
    k: Math.max(0, parseInt($("k").value) || 0),
    gamma: parseFloat($("gamma").value),
    beta: parseFloat($("beta").value),
    iters: Math.max(0, parseInt($("iters").value) || 0),
  };
}

function axes(ctx, w, h, pad) {
  ctx.strokeStyle = "#999";
  ctx.beginPath();
  ctx.moveTo(pad, 4); ctx.lineTo(pad, h - pad); ctx.lineTo(w - 4, h - pad);
  ctx.stroke();
}

function loadCollection() {
  status("building collection...");
  setTimeout(() => {
    try {
      explorer?.free();
      explorer = new Explorer(parseInt($("seed").value) || 0, $("hop").checked);
      const ids = JSON.parse(explorer.queryIds());
      $("query").innerHTML = ids.map((q, i) => `<option value="${i}">${q}</option>`).join("");
      status("");
      updateTrace();
    } catch (e) { status(String(e)); }
  }, 0);
}

function updateTrace() {
  if (!explorer) return;
  const kn = knobs();
  $("gammaOut").textContent = kn.gamma.toFixed(2);
  $("betaOut").textContent = kn.beta.toFixed(2);
  try {
    trace = JSON.parse(explorer.trace(parseInt($("query").value) || 0, kn.k, kn.gamma, kn.beta, kn.iters, $("direction").value));
    $("step").max = trace.iterates.length;
    $("step").value = trace.iterates.length;
    status("");
    drawTrace();
  } catch (e) { status(String(e)); }
}

function drawTrace() {
  if (!trace) return;
  const step = parseInt($("step").value);
  $("stepOut").textContent = `${step} / ${trace.iterates.length}`;
  const x = trace.iterates[step - 1];
  const order = x.map((v, i) => i).sort((a, b) => x[b] - x[a] || (trace.docs[a] < trace.docs[b] ? -1 : 1));
  const c = $("traceCanvas"), ctx = c.getContext("2d");
  ctx.clearRect(0, 0, c.width, c.height);
  const pad = 30, w = (c.width - pad - 10) / x.length, top = Math.max(...x, 1e-12);
  axes(ctx, c.width, c.height, pad);
  order.forEach((doc, rank) => {
    const hgt = (x[doc] / top) * (c.height - pad - 10);
    ctx.fillStyle = trace.relevant[doc] ? "#59a14f" : "#bbb";
    ctx.fillRect(pad + rank * w + 1, c.height - pad - hgt, Math.max(1, w - 2), hgt);
  });
  ctx.fillStyle = "#333";
  ctx.fillText("candidates ranked by score at this step", pad + 4, c.height - 10);
  let rel = 0, ap = 0;
  order.forEach((doc, r) => { if (trace.relevant[doc]) { rel += 1; ap += rel / (r + 1); } });
  const total = trace.relevant.filter(Boolean).length;
  $("traceInfo").textContent =
    `${trace.docs.length} candidates, ${total} relevant; AP over candidates at step ${step}: ${(total ? ap / total : 0).toFixed(4)}; ` +
    (trace.converged ? "converged" : "not converged") + ` after ${trace.deltas.length} steps`;

  const d = $("deltaCanvas"), dc = d.getContext("2d");
  dc.clearRect(0, 0, d.width, d.height);
  axes(dc, d.width, d.height, pad);
  const logs = trace.deltas.map((v) => Math.log10(Math.max(v, 1e-16)));
  if (logs.length) {
    const lo = Math.min(...logs, -10), hi = Math.max(...logs, 0);
    dc.strokeStyle = "#4e79a7";
    dc.beginPath();
    logs.forEach((v, i) => {
      const px = pad + (i + 0.5) * (d.width - pad - 10) / logs.length;
      const py = 4 + (hi - v) / (hi - lo || 1) * (d.height - pad - 8);
      i ? dc.lineTo(px, py) : dc.moveTo(px, py);
    });
    dc.stroke();
    dc.fillStyle = "#333";
    dc.fillText(`log10 L1 change per step (${lo.toFixed(0)} .. ${hi.toFixed(0)})`, pad + 4, d.height - 10);
  }
}

function drawCurve() {
  if (!explorer) return;
  const kn = knobs();
  let curve;
  try {
    curve = JSON.parse(explorer.mapCurve($("param").value, kn.k, kn.gamma, kn.beta, kn.iters, $("weights").value));
    status("");
  } catch (e) { status(String(e)); return; }
  const c = $("curveCanvas"), ctx = c.getContext("2d");
  ctx.clearRect(0, 0, c.width, c.height);
  const pad = 40, n = curve.labels.length;
  axes(ctx, c.width, c.height, pad);
  const vals = curve.map.filter((v) => v !== null).concat([curve.text_map, curve.visual_map]);
  const lo = Math.max(0, Math.min(...vals) - 0.05), hi = Math.min(1, Math.max(...vals) + 0.05);
  const X = (i) => pad + (i + 0.5) * (c.width - pad - 10) / n;
  const Y = (v) => 6 + (hi - v) / (hi - lo || 1) * (c.height - pad - 12);
  const hline = (v, color, label) => {
    ctx.strokeStyle = color; ctx.setLineDash([5, 4]);
    ctx.beginPath(); ctx.moveTo(pad, Y(v)); ctx.lineTo(c.width - 10, Y(v)); ctx.stroke();
    ctx.setLineDash([]); ctx.fillStyle = color; ctx.fillText(`${label} ${v.toFixed(4)}`, c.width - 150, Y(v) - 4);
  };
  hline(curve.text_map, "#e15759", "text only");
  hline(curve.visual_map, "#f28e2b", "visual only");
  ctx.strokeStyle = "#4e79a7"; ctx.fillStyle = "#4e79a7";
  ctx.beginPath();
  let started = false;
  curve.map.forEach((v, i) => {
    if (v === null) return;
    started ? ctx.lineTo(X(i), Y(v)) : ctx.moveTo(X(i), Y(v));
    started = true;
  });
  ctx.stroke();
  ctx.fillStyle = "#333";
  curve.map.forEach((v, i) => {
    ctx.fillText(curve.labels[i], X(i) - 6, c.height - pad + 14);
    if (v !== null) { ctx.beginPath(); ctx.arc(X(i), Y(v), 3, 0, 7); ctx.fill(); ctx.fillText(v.toFixed(3), X(i) - 14, Y(v) - 8); }
  });
  ctx.fillText(`${lo.toFixed(2)}`, 4, Y(lo)); ctx.fillText(`${hi.toFixed(2)}`, 4, Y(hi) + 8);
}

function drawField() {
  let f;
  try {
    f = JSON.parse(gmmField(parseInt($("gSeed").value) || 0, parseInt($("gComp").value) || 1, parseInt($("gN").value) || 100, 96));
    status("");
  } catch (e) { status(String(e)); return; }
  const c = $("gmmCanvas"), ctx = c.getContext("2d");
  const [x0, y0, x1, y1] = f.bounds, r = f.resolution, cell = c.width / r;
  const showPost = $("gShow").value === "post";
  const maxNorm = Math.max(...f.fisher_norm);
  for (let i = 0; i < r; i++) {
    for (let j = 0; j < r; j++) {
      const idx = i * r + j;
      if (showPost) {
        ctx.fillStyle = PALETTE[f.argmax[idx] % PALETTE.length];
        ctx.globalAlpha = 0.25 + 0.6 * f.max_posterior[idx];
      } else {
        const t = Math.sqrt(f.fisher_norm[idx] / maxNorm);
        ctx.fillStyle = `rgb(${Math.round(255 * t)},${Math.round(120 * t)},${Math.round(255 * (1 - t))})`;
        ctx.globalAlpha = 1;
      }
      ctx.fillRect(j * cell, c.height - (i + 1) * cell, cell + 1, cell + 1);
    }
  }
  ctx.globalAlpha = 1;
  const px = (x) => (x - x0) / (x1 - x0) * c.width, py = (y) => c.height - (y - y0) / (y1 - y0) * c.height;
  ctx.fillStyle = "#222";
  f.points.forEach(([x, y]) => ctx.fillRect(px(x) - 1, py(y) - 1, 2, 2));
  ctx.strokeStyle = "#000";
  f.means.forEach((m, i) => {
    ctx.beginPath();
    ctx.ellipse(px(m[0]), py(m[1]), 2 * Math.sqrt(f.variances[i][0]) / (x1 - x0) * c.width,
      2 * Math.sqrt(f.variances[i][1]) / (y1 - y0) * c.height, 0, 0, 7);
    ctx.stroke();
    ctx.fillText(`w=${f.weights[i].toFixed(2)}`, px(m[0]) + 4, py(m[1]) - 4);
  });
}

await init();
$("load").onclick = loadCollection;
["query", "direction", "k", "gamma", "beta", "iters"].forEach((id) => $(id).addEventListener("input", updateTrace));
$("step").addEventListener("input", drawTrace);
$("curveBtn").onclick = drawCurve;
$("gBtn").onclick = drawField;
$("gShow").onchange = drawField;
loadCollection();
drawField();
