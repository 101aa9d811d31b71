import init, { optimizeMesh, quotientRaster, shootGeodesic } from "./pkg/isomesh_web.js";

const FIELDS = ["s1", "s2", "s3", "s4", "s5", "s6"];
const $ = (id) => document.getElementById(id);

function fillFields(id, initial) {
  const sel = $(id);
  for (const f of FIELDS) sel.add(new Option(f, f, false, f === initial));
}

function report(id, text, isError = false) {
  const el = $(id);
  el.textContent = text;
  el.className = isError ? "err" : "";
}

// Maps data coordinates into a canvas, keeping the aspect ratio.
function viewport(canvas, xs, ys, pad = 12) {
  const [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  const [y0, y1] = [Math.min(...ys), Math.max(...ys)];
  const s = Math.min((canvas.width - 2 * pad) / (x1 - x0 || 1), (canvas.height - 2 * pad) / (y1 - y0 || 1));
  return ([x, y]) => [pad + (x - x0) * s, canvas.height - pad - (y - y0) * s];
}

function viridis(t) {
  const stops = [[68, 1, 84], [59, 82, 139], [33, 145, 140], [94, 201, 98], [253, 231, 37]];
  const u = Math.min(Math.max(t, 0), 1) * (stops.length - 1);
  const i = Math.min(Math.floor(u), stops.length - 2);
  const f = u - i;
  const c = stops[i].map((a, k) => Math.round(a + f * (stops[i + 1][k] - a)));
  return `rgb(${c[0]},${c[1]},${c[2]})`;
}

function runOptimize() {
  const config = {
    field: { id: $("opt-field").value },
    tiling: $("opt-tiling").value,
    n: +$("opt-n").value,
    grid: { nx: +$("opt-nx").value, ny: +$("opt-ny").value },
    initial_rotation_degrees: +$("opt-rot").value,
  };
  report("opt-log", "optimizing...");
  // Let the message paint before the synchronous run blocks the page.
  setTimeout(() => {
    try {
      const t = performance.now();
      const m = JSON.parse(optimizeMesh(JSON.stringify(config)));
      drawMesh(m);
      report("opt-log", [
        ...m.stages,
        `E ${m.e_initial.toExponential(3)} -> ${m.e_final.toExponential(3)}`,
        `min quality ${m.min_quality.toFixed(4)}, edge ratio [${m.min_edge_ratio.toFixed(4)}, ${m.max_edge_ratio.toFixed(4)}]`,
        `${((performance.now() - t) / 1000).toFixed(2)} s`,
      ].join("\n"));
    } catch (e) {
      report("opt-log", String(e), true);
    }
  }, 10);
}

function drawMesh(m) {
  const canvas = $("opt-canvas");
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const map = viewport(canvas, m.vertices.map((p) => p[0]), m.vertices.map((p) => p[1]));
  const pts = m.vertices.map(map);
  ctx.lineWidth = 0.4;
  ctx.strokeStyle = "#333";
  m.triangles.forEach((t, k) => {
    ctx.beginPath();
    t.forEach((v, i) => (i ? ctx.lineTo(...pts[v]) : ctx.moveTo(...pts[v])));
    ctx.closePath();
    // Qualities in [0.5, 1] span the colormap.
    ctx.fillStyle = viridis((m.qualities[k] - 0.5) / 0.5);
    ctx.fill();
    ctx.stroke();
  });
  ctx.lineWidth = 2;
  ctx.strokeStyle = "#000";
  for (const path of m.macro_edges) {
    ctx.beginPath();
    path.forEach((v, i) => (i ? ctx.lineTo(...pts[v]) : ctx.moveTo(...pts[v])));
    ctx.stroke();
  }
}

function runQuotient() {
  const canvas = $("q-canvas");
  const [x0, x1, y0, y1] = ["q-x0", "q-x1", "q-y0", "q-y1"].map((id) => +$(id).value);
  const nx = 190;
  const ny = Math.max(1, Math.round((nx * (y1 - y0)) / (x1 - x0)));
  try {
    const r = JSON.parse(quotientRaster($("q-field").value, x0, x1, y0, y1, nx, ny));
    const vals = r.log10_quotient.filter((v) => v !== null);
    const hi = Math.max(1e-12, ...vals);
    const ctx = canvas.getContext("2d");
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    const cw = canvas.width / nx;
    const ch = Math.min(canvas.height / ny, cw);
    r.log10_quotient.forEach((v, k) => {
      const i = k % nx;
      const j = Math.floor(k / nx);
      ctx.fillStyle = v === null ? "#eee" : viridis(v / hi);
      ctx.fillRect(i * cw, (ny - 1 - j) * ch, cw + 0.5, ch + 0.5);
    });
    report("q-log", `log10 quotient in [0, ${hi.toFixed(3)}]; grey cells lie outside the field's domain`);
  } catch (e) {
    report("q-log", String(e), true);
  }
}

// The geodesic canvas shows [-2, 2]^2.
const G = 2;
function geodesicAt(evt) {
  const canvas = $("g-canvas");
  const rect = canvas.getBoundingClientRect();
  const x = ((evt.clientX - rect.left) / rect.width) * 2 * G - G;
  const y = G - ((evt.clientY - rect.top) / rect.height) * 2 * G;
  try {
    const g = JSON.parse(shootGeodesic($("g-field").value, x, y, +$("g-vx").value, +$("g-vy").value, +$("g-t").value, 400));
    const ctx = canvas.getContext("2d");
    const map = ([px, py]) => [((px + G) / (2 * G)) * canvas.width, ((G - py) / (2 * G)) * canvas.height];
    ctx.strokeStyle = "#c00";
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    g.points.forEach((p, i) => (i ? ctx.lineTo(...map(p)) : ctx.moveTo(...map(p))));
    ctx.stroke();
    report("g-log", `start (${x.toFixed(3)}, ${y.toFixed(3)}), metric length ${g.metric_length.toFixed(4)}${g.truncated ? ", left the domain" : ""}`);
  } catch (e) {
    report("g-log", String(e), true);
  }
}

function drawAxes() {
  const canvas = $("g-canvas");
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.strokeStyle = "#bbb";
  ctx.beginPath();
  ctx.moveTo(canvas.width / 2, 0);
  ctx.lineTo(canvas.width / 2, canvas.height);
  ctx.moveTo(0, canvas.height / 2);
  ctx.lineTo(canvas.width, canvas.height / 2);
  ctx.stroke();
}

await init();
fillFields("opt-field", "s2");
fillFields("q-field", "s6");
fillFields("g-field", "s5");
$("opt-run").addEventListener("click", runOptimize);
$("q-run").addEventListener("click", runQuotient);
$("g-field").addEventListener("change", drawAxes);
$("g-canvas").addEventListener("click", geodesicAt);
drawAxes();
runQuotient();
