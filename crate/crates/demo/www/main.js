import init, { basisCurves, cluster2d, rotationView } from "./pkg/qtkit_demo.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);
const COLORS = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#17becf", "#bcbd22"];

function call(f, ...args) {
  try {
    return JSON.parse(f(...args));
  } catch (e) {
    $("status").textContent = String(e.message ?? e);
    $("status").className = "err";
    return null;
  }
}

function plotLines(canvas, xs, series, title) {
  const ctx = canvas.getContext("2d");
  const w = canvas.width, h = canvas.height, pad = 30;
  ctx.clearRect(0, 0, w, h);
  const all = series.flat();
  let lo = Math.min(...all), hi = Math.max(...all);
  if (hi - lo < 1e-12) { lo -= 1; hi += 1; }
  const x0 = xs[0], x1 = xs[xs.length - 1];
  const px = (x) => pad + ((x - x0) / (x1 - x0)) * (w - 2 * pad);
  const py = (y) => h - pad - ((y - lo) / (hi - lo)) * (h - 2 * pad);
  ctx.strokeStyle = "#999";
  ctx.beginPath();
  ctx.moveTo(pad, py(0)); ctx.lineTo(w - pad, py(0));
  ctx.stroke();
  series.forEach((ys, k) => {
    ctx.strokeStyle = COLORS[k % COLORS.length];
    ctx.beginPath();
    ys.forEach((y, i) => (i ? ctx.lineTo(px(xs[i]), py(y)) : ctx.moveTo(px(xs[i]), py(y))));
    ctx.stroke();
  });
  ctx.fillStyle = "#222";
  ctx.fillText(title, pad, 14);
  ctx.fillText(x0.toFixed(1), pad, h - 10);
  ctx.fillText(x1.toFixed(1), w - pad - 20, h - 10);
}

function drawBasis() {
  const c = call(basisCurves, num("b-cutoff"), num("b-nmax"), num("b-deg"), 200);
  if (!c) return;
  plotLines($("b-radial"), c.r, c.radial, "radial basis vs r (Bohr)");
  plotLines($("b-angular"), c.x, c.angular, "Legendre P_l vs cos θ");
}

// Small seeded generator so a seed always gives the same point cloud.
function mulberry32(a) {
  return () => {
    a |= 0; a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function samplePoints(perBlob, noise, seed) {
  const rand = mulberry32(seed);
  const gauss = () => Math.sqrt(-2 * Math.log(1 - rand())) * Math.cos(2 * Math.PI * rand());
  const centers = [[-3, -2], [3, -1], [0, 3.5]];
  const pts = [];
  for (const [cx, cy] of centers) {
    for (let i = 0; i < perBlob; i++) pts.push(cx + 0.7 * gauss(), cy + 0.7 * gauss());
  }
  for (let i = 0; i < noise; i++) pts.push(-7 + 14 * rand(), -7 + 14 * rand());
  return new Float64Array(pts);
}

function drawClusters() {
  const pts = samplePoints(num("c-n"), num("c-noise"), num("c-seed"));
  const c = call(cluster2d, pts, num("c-mcs"), num("c-ms"));
  if (!c) return;
  $("c-info").textContent = `${c.n_clusters} clusters, ${c.noise} noise points of ${c.labels.length}`;
  const canvas = $("c-plot"), ctx = canvas.getContext("2d");
  const s = canvas.width / 16;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  c.labels.forEach((l, i) => {
    ctx.fillStyle = l < 0 ? "#bbb" : COLORS[l % COLORS.length];
    ctx.beginPath();
    ctx.arc((pts[2 * i] + 8) * s, canvas.height - (pts[2 * i + 1] + 8) * s, l < 0 ? 2 : 3, 0, 2 * Math.PI);
    ctx.fill();
  });
}

function drawRotation() {
  const angle = num("r-angle");
  $("r-angle-v").textContent = angle;
  const v = call(rotationView, num("r-ax"), num("r-ay"), num("r-az"), angle, num("r-vx"), num("r-vy"), num("r-vz"));
  if (!v) return;
  const f = (a) => "[" + a.map((x) => x.toFixed(4).padStart(8)).join(", ") + "]";
  const p2 = 0.5 * (3 * v.cos_angle ** 2 - 1);
  $("r-out").textContent = [
    "R =",
    ...v.matrix.map((row) => "  " + f(row)),
    `v        = ${f(v.vector)}`,
    `R v      = ${f(v.rotated)}`,
    `G(v)     = ${f(v.gyration)}`,
    `R G Rᵀ   = ${f(v.gyration_rotated)}`,
    `G(R v)   = ${f(v.gyration_of_rotated)}`,
    `|R G Rᵀ − G(R v)| = ${v.equivariance_error.toExponential(2)}`,
    `cos θ = ${v.cos_angle.toFixed(6)}   ⟨G(v), G(R v)⟩ = ${v.cos_gyration.toFixed(6)}   P₂(cos θ) = ${p2.toFixed(6)}`,
  ].join("\n");
}

await init();
$("status").textContent = "Ready.";
$("b-go").onclick = drawBasis;
$("c-go").onclick = drawClusters;
for (const id of ["r-ax", "r-ay", "r-az", "r-vx", "r-vy", "r-vz", "r-angle"]) $(id).oninput = drawRotation;
drawBasis();
drawClusters();
drawRotation();
