import init, { tire_curve, design, run } from "./pkg/ptw_wasm.js";

const $ = (id) => document.getElementById(id);

function plot(canvas, series, opts = {}) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = 48;
  ctx.clearRect(0, 0, w, h);
  const xs = series.flatMap((s) => s.x);
  const ys = series.flatMap((s) => s.y).filter(Number.isFinite);
  let [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  let [y0, y1] = [Math.min(...ys), Math.max(...ys)];
  if (y1 - y0 < 1e-12) { y0 -= 1; y1 += 1; }
  if (x1 - x0 < 1e-12) { x0 -= 1; x1 += 1; }
  const px = (x) => pad + ((x - x0) / (x1 - x0)) * (w - 2 * pad);
  const py = (y) => h - pad + ((y0 - y) / (y1 - y0)) * (h - 2 * pad);
  ctx.strokeStyle = "#888";
  ctx.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  ctx.fillStyle = "#333";
  ctx.font = "11px system-ui";
  ctx.fillText(y1.toPrecision(4), 2, pad + 4);
  ctx.fillText(y0.toPrecision(4), 2, h - pad + 4);
  ctx.fillText(x0.toPrecision(3), pad, h - pad + 16);
  ctx.fillText(x1.toPrecision(3), w - pad - 30, h - pad + 16);
  if (opts.xlabel) ctx.fillText(opts.xlabel, w / 2, h - 8);
  series.forEach((s, k) => {
    ctx.strokeStyle = ctx.fillStyle = s.color;
    if (s.points) {
      s.x.forEach((x, i) => {
        ctx.beginPath();
        ctx.arc(px(x), py(s.y[i]), 3, 0, 2 * Math.PI);
        ctx.fill();
      });
    } else {
      ctx.beginPath();
      s.x.forEach((x, i) => (i ? ctx.lineTo(px(x), py(s.y[i])) : ctx.moveTo(px(x), py(s.y[i]))));
      ctx.stroke();
    }
    ctx.fillText(s.label, w - pad - 120, pad + 14 + 14 * k);
  });
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

function drawTire() {
  const range = Number($("tire-range").value);
  const n = 201;
  const y = tire_curve($("tire-channel").value, $("tire-wheel").value === "front", -range, range, n);
  const x = Array.from({ length: n }, (_, k) => -range + (2 * range * k) / (n - 1));
  plot($("tire-plot"), [{ x, y: Array.from(y), color: "#06c", label: "force (N)" }], { xlabel: "slip" });
}

function drawDesign() {
  const d = design(Number($("d-speed").value), Number($("d-q").value), Number($("d-r").value));
  const t = d.trim;
  const re = Array.from(d.re), im = Array.from(d.im), ex = Array.from(d.excluded);
  const slowest = Math.max(...re.filter((_, i) => !ex[i]));
  $("d-out").textContent =
    `v_x* = ${t[3].toFixed(3)} m/s   dtheta_f* = ${t[8].toFixed(3)}   dtheta_r* = ${t[9].toFixed(3)} rad/s\n` +
    `F_rx* = ${t[11].toFixed(3)} N   tau_D* = ${d.drive_torque.toFixed(3)} N m\n` +
    `Riccati residual ${d.riccati_residual.toExponential(2)}   slowest designed pole ${slowest.toExponential(3)}\n` +
    `${ex.filter((e) => e).length} unobservable heading mode(s) left at the origin (orange)`;
  const sx = (z) => Math.sign(z) * Math.log10(1 + Math.abs(z));
  plot($("d-plot"), [
    { x: re.filter((_, i) => !ex[i]).map(sx), y: im.filter((_, i) => !ex[i]).map(sx), color: "#06c", label: "eig(A - GC)", points: true },
    { x: re.filter((_, i) => ex[i]).map(sx), y: im.filter((_, i) => ex[i]).map(sx), color: "#e80", label: "excluded", points: true },
  ], { xlabel: "sign(Re) log10(1+|Re|)  vs  sign(Im) log10(1+|Im|)" });
}

function drawRun() {
  const t0 = performance.now();
  const r = run(
    Number($("r-plant").value), Number($("r-obs").value), Number($("r-off").value),
    Number($("r-mass").value), Number($("r-dur").value), $("r-noise").checked,
  );
  const ch = $("r-channel").value;
  const t = Array.from(r.t), p = Array.from(r.plant(ch)), e = Array.from(r.estimate(ch));
  const last = t.length - 1;
  $("r-out").textContent =
    `${ch}: plant ${p[last].toPrecision(6)}   estimate ${e[last].toPrecision(6)}   ` +
    `error ${(e[last] - p[last]).toExponential(2)}   (${(performance.now() - t0).toFixed(0)} ms)`;
  plot($("r-plot"), [
    { x: t, y: p, color: "#333", label: `plant ${ch}` },
    { x: t, y: e, color: "#d22", label: `estimate ${ch}` },
  ], { xlabel: "t (s)" });
}

await init();
$("tire-go").onclick = () => guard($("d-out"), drawTire);
$("d-go").onclick = () => guard($("d-out"), drawDesign);
$("r-go").onclick = () => guard($("r-out"), drawRun);
$("r-channel").onchange = () => guard($("r-out"), drawRun);
guard($("d-out"), drawTire);
guard($("d-out"), drawDesign);
