// Page wiring: one socket for samples, one for control, rendering decoupled
// from the network through the bounded buffers. Display-and-annotate only;
// nothing here mutates sample data.

import { ControlChannel } from "./annotator.js";
import { drawChart } from "./chart.js";
import { SocketLike, StreamConnection } from "./connection.js";
import { Point } from "./decimate.js";
import { SampleMsg } from "./protocol.js";

const WINDOW_S = 15; // covers one 5 s rest / 5 s hold / 5 s rest trial
const TARGET_EQUIV_PA = 198.1; // default band center: 10 N.m at default gain

function wsBase(): string {
  const wsPort = Number(location.port || 80) + 1;
  return `ws://${location.hostname}:${wsPort}`;
}

export function startApp(doc: Document): void {
  const canvas = doc.getElementById("chart") as HTMLCanvasElement;
  const ctx = canvas.getContext("2d")!;
  const stateEl = doc.getElementById("conn-state")!;
  const ageEl = doc.getElementById("sample-age")!;
  const healthEl = doc.getElementById("health")!;
  const eventsEl = doc.getElementById("events")!;
  const pendingEl = doc.getElementById("pending")!;
  const valueEl = doc.getElementById("live-value")!;

  const trace: Point[] = [];
  let tLatest = 0;

  const stream = new StreamConnection(`${wsBase()}/stream`);
  stream.onStateChange = (state) => {
    stateEl.textContent = state;
    stateEl.className = `state-${state}`;
  };
  stream.connect();

  const control = new ControlChannel();
  const attachControl = () => {
    const sock = new WebSocket(`${wsBase()}/control`);
    control.attach(sock as unknown as SocketLike);
    sock.addEventListener("close", () => setTimeout(attachControl, 1000));
  };
  attachControl();

  const labelInput = doc.getElementById("label") as HTMLInputElement;
  const conditionInput = doc.getElementById("condition") as HTMLInputElement;
  const massInput = doc.getElementById("mass-kg") as HTMLInputElement;
  const angleInput = doc.getElementById("angle-deg") as HTMLInputElement;

  const payload = () => ({
    condition: conditionInput.value || undefined,
    mass_kg: massInput.value === "" ? undefined : Number(massInput.value),
    angle_deg: angleInput.value === "" ? undefined : Number(angleInput.value),
  });

  doc.getElementById("btn-start")!.addEventListener("click", () => {
    control.send("trial_start", labelInput.value || "trial", payload());
  });
  doc.getElementById("btn-stop")!.addEventListener("click", () => {
    control.send("trial_stop", labelInput.value || "trial", payload());
  });
  doc.getElementById("btn-annotate")!.addEventListener("click", () => {
    control.send("annotate", labelInput.value || "note", payload());
  });

  control.onUpdate = () => {
    const rows = control.entries.slice(-6).reverse().map((e) => {
      const flags = [e.status, e.delayed ? "delayed" : ""].filter(Boolean).join(", ");
      return `<li>${e.msg.type} "${e.msg.label}" — ${flags}` +
        (e.status === "retry_prompt" ? " <em>(no ack in 2 s; press again to retry)</em>" : "") +
        "</li>";
    });
    pendingEl.innerHTML = rows.join("");
  };

  const band = { lo: TARGET_EQUIV_PA * 0.9, hi: TARGET_EQUIV_PA * 1.1 };
  const layout = { width: canvas.width, height: canvas.height, padLeft: 56, padBottom: 18 };

  function absorb(samples: SampleMsg[]): void {
    for (const s of samples) {
      trace.push({ t: s.t_s, v: s.pa });
      if (s.t_s > tLatest) tLatest = s.t_s;
    }
    const cutoff = tLatest - WINDOW_S * 1.2;
    while (trace.length > 0 && trace[0].t < cutoff) trace.shift();
  }

  function renderLoop(): void {
    absorb(stream.samples.drain());
    for (const ev of stream.events.drain()) {
      const li = doc.createElement("li");
      li.textContent = `${ev.t_s.toFixed(2)} s — ${ev.label}`;
      eventsEl.prepend(li);
      while (eventsEl.children.length > 8) eventsEl.lastChild?.remove();
    }
    control.tick();

    const age = stream.sampleAgeMs();
    ageEl.textContent = age === null ? "—" : `${age.toFixed(0)} ms`;
    const last = trace[trace.length - 1];
    valueEl.textContent = last ? `${last.v.toFixed(1)} Pa` : "— Pa";
    if (stream.health) {
      const h = stream.health;
      healthEl.textContent =
        `frames ${h.frames_ok} | crc fail ${h.frames_crc_fail} | ` +
        `resync ${h.frames_resync} | gaps ${h.gaps}`;
    }
    drawChart(ctx, trace, tLatest, {
      layout,
      windowS: WINDOW_S,
      band,
      unit: "Pa",
      stale: stream.isStale(),
    });
    requestAnimationFrame(renderLoop);
  }
  requestAnimationFrame(renderLoop);
}
