import init, { DemoLink } from './pkg/hpgpn_demo.js';

const SCHEMES = ['qam4', 'qam16', 'pqam16-4', 'pqam16-8', 'pqam4-1'];
const REGIMES = [['off', 0], ['low', 1e-3], ['medium', 1e-2], ['strong', 1e-1]];
const COLORS = ['#1f77b4', '#d62728', '#2ca02c', '#9467bd', '#ff7f0e'];

const $ = (id) => document.getElementById(id);
let link = null;

function fill(id, items, selected) {
  const el = $(id);
  el.innerHTML = '';
  for (const [label, value] of items) {
    const o = document.createElement('option');
    o.textContent = label;
    o.value = value;
    if (label === selected) o.selected = true;
    el.appendChild(o);
  }
  return el;
}

function frame(canvas, xr, yr, log, xlabel, ylabel) {
  const ctx = canvas.getContext('2d');
  const w = canvas.width, h = canvas.height, m = { l: 60, r: 15, t: 12, b: 40 };
  ctx.clearRect(0, 0, w, h);
  const ty = (v) => (log ? Math.log10(v) : v);
  const [y0, y1] = [ty(yr[0]), ty(yr[1])];
  const X = (x) => m.l + ((x - xr[0]) / (xr[1] - xr[0])) * (w - m.l - m.r);
  const Y = (y) => h - m.b - ((ty(y) - y0) / (y1 - y0)) * (h - m.t - m.b);
  ctx.strokeStyle = '#ddd';
  ctx.fillStyle = '#444';
  ctx.font = '12px sans-serif';
  ctx.lineWidth = 1;
  const xs = niceTicks(xr[0], xr[1]);
  for (const x of xs) {
    ctx.beginPath(); ctx.moveTo(X(x), m.t); ctx.lineTo(X(x), h - m.b); ctx.stroke();
    ctx.fillText(String(x), X(x) - 8, h - m.b + 15);
  }
  const ys = log ? decades(yr) : niceTicks(yr[0], yr[1]);
  for (const y of ys) {
    ctx.beginPath(); ctx.moveTo(m.l, Y(y)); ctx.lineTo(w - m.r, Y(y)); ctx.stroke();
    ctx.fillText(log ? `1e${Math.round(Math.log10(y))}` : String(y), 5, Y(y) + 4);
  }
  ctx.fillText(xlabel, w / 2 - 20, h - 8);
  ctx.save(); ctx.translate(14, h / 2); ctx.rotate(-Math.PI / 2); ctx.fillText(ylabel, 0, 0); ctx.restore();
  return { ctx, X, Y };
}

function niceTicks(a, b) {
  const span = b - a, raw = span / 6, p = 10 ** Math.floor(Math.log10(raw));
  const step = [1, 2, 2.5, 5, 10].map((k) => k * p).find((s) => s >= raw);
  const out = [];
  for (let v = Math.ceil(a / step) * step; v <= b + 1e-9; v += step) out.push(+v.toFixed(6));
  return out;
}

function decades([lo, hi]) {
  const out = [];
  for (let e = Math.ceil(Math.log10(lo)); e <= Math.floor(Math.log10(hi)); e += 1) out.push(10 ** e);
  return out;
}

function line(p, xs, ys, color, dash = []) {
  const { ctx, X, Y } = p;
  ctx.strokeStyle = color; ctx.lineWidth = 2; ctx.setLineDash(dash);
  ctx.beginPath();
  let pen = false;
  xs.forEach((x, i) => {
    const y = ys[i];
    if (!(y > 0) && p.log) { pen = false; return; }
    if (!Number.isFinite(y)) { pen = false; return; }
    pen ? ctx.lineTo(X(x), Y(y)) : ctx.moveTo(X(x), Y(y));
    pen = true;
  });
  ctx.stroke(); ctx.setLineDash([]);
}

function legend(id, entries) {
  $(id).innerHTML = entries.map(([t, c, d]) =>
    `<span style="color:${c}">${d ? '- -' : '---'} ${t}</span>`).join('');
}

function drawScatter() {
  const s = JSON.parse(link.scatter($('sc-scheme').value, +$('sc-snr').value, +$('sc-pn').value, 3000));
  const lim = 1.15 * Math.max(...s.ideal.map(([x, y]) => Math.hypot(x, y)));
  const p = frame($('sc-canvas'), [-lim, lim], [-lim, lim], false, 'in-phase', 'quadrature');
  const { ctx, X, Y } = p;
  s.rx.forEach(([x, y], i) => {
    ctx.fillStyle = COLORS[s.ring[s.tx[i]] % COLORS.length] + '55';
    ctx.fillRect(X(x) - 1, Y(y) - 1, 2, 2);
  });
  ctx.fillStyle = '#000';
  for (const [x, y] of s.ideal) { ctx.beginPath(); ctx.arc(X(x), Y(y), 3.5, 0, 2 * Math.PI); ctx.fill(); }
}

function drawBer() {
  const c = JSON.parse(link.ber_curves($('ber-scheme').value, +$('ber-pn').value, -10, 40, 1));
  const p = frame($('ber-canvas'), [-10, 40], [1e-7, 1], true, 'SNR (dB)', 'BER');
  p.log = true;
  line(p, c.snr_db, c.without_pn, COLORS[0]);
  line(p, c.snr_db, c.with_pn, COLORS[1]);
  if (c.floor) line(p, [-10, 40], [c.floor, c.floor], COLORS[1], [6, 4]);
  line(p, [-10, 40], [1e-4, 1e-4], '#888', [2, 4]);
  legend('ber-legend', [['no phase noise', COLORS[0]], ['with phase noise', COLORS[1]],
    ['error floor', COLORS[1], true], ['target 1e-4', '#888', true]]);
}

function drawSe() {
  const c = JSON.parse(link.se_curves(+$('se-pn').value, -10, 40, 1));
  const top = Math.max(...c.fdp) * 1.05;
  const p = frame($('se-canvas'), [-10, 40], [0, top], false, 'SNR (dB)', 'b/s/Hz');
  line(p, c.snr_db, c.fdp, COLORS[2]);
  line(p, c.snr_db, c.hp_no_pn, COLORS[0], [6, 4]);
  line(p, c.snr_db, c.hp_pn_bound, COLORS[1]);
  if (c.high_snr_limit) line(p, [-10, 40], [c.high_snr_limit, c.high_snr_limit], COLORS[1], [2, 4]);
  legend('se-legend', [['fully digital', COLORS[2]], ['hybrid, no phase noise', COLORS[0], true],
    ['hybrid, lower bound with phase noise', COLORS[1]], ['high-SNR limit', COLORS[1], true]]);
}

function guarded(f) {
  return () => {
    try { f(); } catch (e) { $('status').textContent = `error: ${e.message ?? e}`; }
  };
}

function design() {
  const n = +$('channels').value, seed = BigInt($('seed').value || 0);
  $('status').textContent = 'designing precoders...';
  setTimeout(guarded(() => {
    const t = performance.now();
    if (link) link.free();
    link = new DemoLink(n, seed);
    $('status').textContent = `${link.n_channels} channel realisations designed in ${(performance.now() - t).toFixed(0)} ms`;
    drawScatter(); drawBer(); drawSe();
  }), 10);
}

await init();
const schemes = SCHEMES.map((s) => [s, s]);
const regimes = REGIMES.map(([l, v]) => [l, v]);
fill('sc-scheme', schemes, 'qam16').onchange = guarded(drawScatter);
fill('sc-pn', regimes, 'medium').onchange = guarded(drawScatter);
fill('ber-scheme', schemes, 'qam16').onchange = guarded(drawBer);
fill('ber-pn', regimes, 'strong').onchange = guarded(drawBer);
fill('se-pn', regimes, 'strong').onchange = guarded(drawSe);
$('sc-snr').oninput = guarded(() => { $('sc-snr-v').textContent = $('sc-snr').value; drawScatter(); });
$('design').onclick = design;
design();
