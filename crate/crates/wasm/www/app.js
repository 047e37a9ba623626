import init, { window_analysis, fdr_explore, spls_cim } from "./pkg/myoaudit_wasm.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function parse(json, errId) {
  const v = JSON.parse(json);
  $(errId).textContent = v.error ?? "";
  return v.error ? null : v;
}

function line(canvas, xs, ys, color) {
  const ctx = canvas.getContext("2d");
  const [w, h] = [canvas.width, canvas.height];
  const [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  const [y0, y1] = [Math.min(...ys), Math.max(...ys)];
  ctx.strokeStyle = color;
  ctx.beginPath();
  xs.forEach((x, i) => {
    const px = ((x - x0) / (x1 - x0 || 1)) * (w - 10) + 5;
    const py = h - 5 - ((ys[i] - y0) / (y1 - y0 || 1)) * (h - 10);
    i === 0 ? ctx.moveTo(px, py) : ctx.lineTo(px, py);
  });
  ctx.stroke();
}

function clear(canvas, title) {
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.fillStyle = "#555";
  ctx.font = "11px sans-serif";
  ctx.fillText(title, 6, 12);
}

function runWindow() {
  const r = parse(window_analysis(num("w-seed"), num("w-n"), 2000, num("w-cut")), "w-err");
  if (!r) return;
  clear($("w-signal"), "signal (mV)");
  line($("w-signal"), r.signal.map((_, i) => i), r.signal, "#4575b4");
  clear($("w-spectrum"), "log10 power vs frequency (0-1000 Hz)");
  line($("w-spectrum"), r.freqs.slice(1), r.power.slice(1).map((p) => Math.log10(p + 1e-18)), "#d73027");
  const wpt = $("w-wpt");
  clear(wpt, "WPT relative energy, nodes 0-15");
  const ctx = wpt.getContext("2d");
  const top = Math.max(...r.wpt_relative_energy);
  const bw = (wpt.width - 20) / 16;
  r.wpt_relative_energy.forEach((e, i) => {
    const h = (e / top) * (wpt.height - 30);
    ctx.fillStyle = "#74add1";
    ctx.fillRect(10 + i * bw, wpt.height - 5 - h, bw - 2, h);
  });
  const pick = ["MAV", "RMS", "WL", "ZC", "SSC", "MNF", "MDF", "PKF", "HMob", "HCom", "HFD"];
  const rows = r.features.filter(([n]) => pick.includes(n));
  $("w-table").innerHTML =
    "<tr>" + rows.map(([n]) => `<th>${n}</th>`).join("") + "</tr>" +
    "<tr>" + rows.map(([, v]) => `<td>${v.toPrecision(4)}</td>`).join("") + "</tr>";
}

function runFdr() {
  const pairs = $("f-input").value.split("\n").map((l) => l.split(",").map(Number)).filter((p) => p.length === 2 && p.every(Number.isFinite));
  const p = new Float64Array(pairs.map((x) => x[0]));
  const eta = new Float64Array(pairs.map((x) => x[1]));
  const r = parse(fdr_explore(p, eta, num("f-p"), num("f-eta")), "f-err");
  if (!r) return;
  $("f-table").innerHTML =
    "<tr><th>p</th><th>eta2</th><th>BH-adjusted p</th><th>significant</th></tr>" +
    pairs.map((x, i) => `<tr class="${r.significant[i] ? "sig" : ""}"><td>${x[0]}</td><td>${x[1]}</td><td>${r.p_fdr[i].toPrecision(4)}</td><td>${r.significant[i]}</td></tr>`).join("") +
    `<tr><th colspan="3">significant pairs</th><th>${r.n_significant}</th></tr>`;
}

function colour(t) {
  const [a, b] = t < 0 ? [[255, 255, 255], [49, 54, 149]] : [[255, 255, 255], [165, 0, 38]];
  const s = Math.min(1, Math.abs(t));
  return `rgb(${a.map((c, k) => Math.round(c + (b[k] - c) * s)).join(",")})`;
}

function runSpls() {
  const r = parse(spls_cim(num("s-seed"), num("s-n"), num("s-keep"), num("s-noise")), "s-err");
  if (!r) return;
  const L = r.layout;
  const canvas = $("s-cim");
  clear(canvas, "component-1 loading products, rows and columns in leaf order");
  const ctx = canvas.getContext("2d");
  const q = L.col_names.length;
  const vmax = Math.max(...L.cells.map(Math.abs)) || 1;
  const [cw, ch, x0, y0] = [40, 18, 60, 40];
  L.col_order.forEach((c, ci) => {
    ctx.fillStyle = "#333";
    ctx.fillText(L.col_names[c], x0 + ci * cw + 10, y0 - 6);
  });
  L.row_order.forEach((r_, ri) => {
    ctx.fillStyle = "#333";
    ctx.fillText(L.row_names[r_] + (r.planted[r_] !== 0 ? " *" : ""), 6, y0 + ri * ch + 13);
    L.col_order.forEach((c, ci) => {
      ctx.fillStyle = colour(L.cells[r_ * q + c] / vmax);
      ctx.fillRect(x0 + ci * cw, y0 + ri * ch, cw - 1, ch - 1);
    });
  });
}

await init();
$("w-run").onclick = runWindow;
$("f-run").onclick = runFdr;
$("s-run").onclick = runSpls;
runWindow();
runFdr();
runSpls();
