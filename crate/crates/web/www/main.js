import init, { Demo } from "../pkg/tdho_web.js";

const DEFAULT = {
  params: { omega: 1.0, sigma: 0.1875, r0: 1.0 },
  potential: {
    components: [
      { kind: "gaussian_bump", amplitude: 0.5, center: [-1.0, 0.0], width: 1.0 },
      { kind: "gaussian_bump", amplitude: 0.3, center: [1.2, 0.6], width: 0.8 },
    ],
  },
  scan: { angles: 48, offsets: 65, ds: 0.125, speed: 32.0, probe_width: 0.5, max_hole_fraction: 0.05 },
  recon: { grid: { dim: 2, points: 128, half_width: 4.0 }, support_radius: 3.0, deconvolve: 0.01 },
};

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);
let demo = null;

function fail(el, e) {
  el.textContent = String(e);
  el.classList.add("err");
}

// yield to the browser so the "working" text shows before a long call
const later = (f) => new Promise((ok) => setTimeout(() => ok(f()), 20));

function load() {
  try {
    demo = new Demo($("config").value);
    $("status").textContent = "loaded";
    $("status").classList.remove("err");
  } catch (e) {
    demo = null;
    fail($("status"), e);
  }
}

async function runElement() {
  const out = $("e-out");
  out.classList.remove("err");
  out.textContent = "working...";
  try {
    const t0 = performance.now();
    const [re, im, tStar] = await later(() => demo.element(num("e-angle"), num("e-offset"), num("e-speed")));
    const ms = (performance.now() - t0).toFixed(0);
    out.textContent = `|v|·element = ${re.toFixed(6)} ${im >= 0 ? "+" : "-"} ${Math.abs(im).toFixed(6)}i   t* = ${tStar.toFixed(4)}   (${ms} ms)`;
  } catch (e) {
    fail(out, e);
  }
}

function plotRow(canvas, s, re, im, limit) {
  const g = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  g.clearRect(0, 0, w, h);
  const top = Math.max(...limit, ...re) * 1.1 || 1;
  const bottom = Math.min(0, ...im) * 1.1;
  const X = (x) => 30 + ((x - s[0]) / (s[s.length - 1] - s[0])) * (w - 40);
  const Y = (y) => h - 20 - ((y - bottom) / (top - bottom)) * (h - 30);
  g.strokeStyle = "#bbb";
  g.beginPath();
  g.moveTo(X(s[0]), Y(0));
  g.lineTo(X(s[s.length - 1]), Y(0));
  g.stroke();
  const line = (ys, color) => {
    g.strokeStyle = color;
    g.beginPath();
    ys.forEach((y, i) => (i ? g.lineTo(X(s[i]), Y(y)) : g.moveTo(X(s[i]), Y(y))));
    g.stroke();
  };
  const dots = (ys, color) => {
    g.fillStyle = color;
    ys.forEach((y, i) => g.fillRect(X(s[i]) - 2, Y(y) - 2, 5, 5));
  };
  line(limit, "#333");
  dots(re, "#c33");
  dots(im, "#36c");
  g.fillStyle = "#333";
  g.fillText("line: X-ray limit   red: Re |v|·element   blue: Im", 36, 14);
}

async function runRow() {
  const out = $("r-out");
  out.classList.remove("err");
  out.textContent = "scanning...";
  try {
    const n = Math.max(2, Math.round(num("r-samples")));
    const t0 = performance.now();
    const flat = await later(() => demo.row(num("r-angle"), num("r-speed"), n));
    const ms = (performance.now() - t0).toFixed(0);
    const part = (k) => Array.from(flat.slice(k * n, (k + 1) * n));
    const [s, re, im, limit] = [0, 1, 2, 3].map(part);
    plotRow($("r-plot"), s, re, im, limit);
    const peak = Math.max(...limit);
    const worst = Math.max(...re.map((r, i) => Math.abs(r - limit[i])));
    out.textContent = `max |Re - limit| = ${(worst / peak * 100).toFixed(2)}% of peak   (${ms} ms)`;
  } catch (e) {
    fail(out, e);
  }
}

function paint(canvas, values, n, lo, hi) {
  canvas.width = n;
  canvas.height = n;
  canvas.style.width = canvas.style.height = `${Math.max(256, n * 2)}px`;
  const g = canvas.getContext("2d");
  const img = g.createImageData(n, n);
  for (let i = 0; i < n; i++) {
    for (let j = 0; j < n; j++) {
      // x runs right with index i, y runs up with index j
      const v = (values[i * n + j] - lo) / (hi - lo || 1);
      const c = Math.round(255 * Math.min(1, Math.max(0, v)));
      const p = 4 * ((n - 1 - j) * n + i);
      img.data[p] = img.data[p + 1] = img.data[p + 2] = c;
      img.data[p + 3] = 255;
    }
  }
  g.putImageData(img, 0, 0);
}

async function runPreview() {
  const out = $("p-out");
  out.classList.remove("err");
  out.textContent = "inverting...";
  try {
    const n = Math.round(num("p-points"));
    const t0 = performance.now();
    const flat = await later(() => demo.preview(Math.round(num("p-angles")), n));
    const ms = (performance.now() - t0).toFixed(0);
    const recon = flat.slice(0, n * n);
    const truth = flat.slice(n * n);
    const hi = Math.max(...truth);
    paint($("p-recon"), recon, n, 0, hi);
    paint($("p-truth"), truth, n, 0, hi);
    let num2 = 0;
    let den = 0;
    for (let k = 0; k < n * n; k++) {
      num2 += (recon[k] - truth[k]) ** 2;
      den += truth[k] ** 2;
    }
    out.textContent = `left: backprojection of the exact transform, right: potential   relative L2 ${Math.sqrt(num2 / den).toFixed(3)}   (${ms} ms)`;
  } catch (e) {
    fail(out, e);
  }
}

await init();
$("config").value = JSON.stringify(DEFAULT, null, 2);
load();
$("load").onclick = load;
$("e-run").onclick = runElement;
$("r-run").onclick = runRow;
$("p-run").onclick = runPreview;
