// Single-page wiring: canvas on the left, job dashboard on the right,
// viewers below. All DOM access lives here; the modules it drives are
// browser-free and unit tested.

import { ApiClient, ApiError, JobView } from "./api.js";
import { CanvasState, DEFAULT_OVERLAY_OPACITY } from "./canvas.js";
import { SessionHistory } from "./history.js";
import { DensityGridMeta, marchingCubes, parseDensityGrid, projectMesh } from "./mesh.js";
import { JobPoller } from "./polling.js";

const CANVAS_SIZE = 256;

export function startApp(root: HTMLElement, baseUrl = ""): void {
  const client = new ApiClient(baseUrl);
  const state = new CanvasState(CANVAS_SIZE);
  const history = new SessionHistory();

  root.innerHTML = `
    <div class="row">
      <section>
        <canvas id="sketch" width="${CANVAS_SIZE}" height="${CANVAS_SIZE}"></canvas>
        <div>
          <button id="undo">undo</button>
          <button id="clear">clear</button>
          <button id="erase">erase: off</button>
          <label>overlay <input id="opacity" type="range" min="0" max="100"
            value="${DEFAULT_OVERLAY_OPACITY * 100}"></label>
          <button id="submit" disabled>sketch &rarr; 3D</button>
          <button id="roundtrip" disabled>roundtrip</button>
        </div>
        <div id="banner"></div>
      </section>
      <section>
        <h3>jobs</h3>
        <ul id="jobs"></ul>
        <button id="interp" disabled>interpolate selected</button>
        <label>steps <input id="interp-n" type="number" min="2" max="32" value="6"></label>
      </section>
    </div>
    <div class="row">
      <section><h3>turntable</h3><img id="frame">
        <input id="scrub" type="range" min="0" max="0" value="0"></section>
      <section><h3>mesh</h3>
        <canvas id="mesh" width="256" height="256"></canvas>
        <input id="mesh-az" type="range" min="0" max="360" value="30"></section>
      <section><h3>morph</h3><img id="morph-frame">
        <input id="morph-slider" type="range" min="0" max="0" value="0"></section>
    </div>`;

  const sketchCanvas = root.querySelector<HTMLCanvasElement>("#sketch")!;
  const ctx = sketchCanvas.getContext("2d")!;
  const banner = root.querySelector<HTMLElement>("#banner")!;
  const jobsList = root.querySelector<HTMLElement>("#jobs")!;
  const submitBtn = root.querySelector<HTMLButtonElement>("#submit")!;
  const roundtripBtn = root.querySelector<HTMLButtonElement>("#roundtrip")!;
  const interpBtn = root.querySelector<HTMLButtonElement>("#interp")!;
  const eraseBtn = root.querySelector<HTMLButtonElement>("#erase")!;
  let erasing = false;

  function repaint(): void {
    const pixels = state.compositeWithOverlay();
    const img = ctx.createImageData(CANVAS_SIZE, CANVAS_SIZE);
    for (let i = 0; i < pixels.length; i++) {
      const v = Math.round(pixels[i] * 255);
      img.data[4 * i] = v;
      img.data[4 * i + 1] = v;
      img.data[4 * i + 2] = v;
      img.data[4 * i + 3] = 255;
    }
    ctx.putImageData(img, 0, 0);
    submitBtn.disabled = !state.canSubmit;
    roundtripBtn.disabled = !state.canSubmit;
  }

  function showError(err: unknown): void {
    banner.textContent = err instanceof ApiError ? err.message : String(err);
  }

  function renderJobs(): void {
    jobsList.innerHTML = "";
    for (const e of history.entries) {
      const li = document.createElement("li");
      li.textContent = `${e.jobId} ${e.kind} ${e.status}`;
      li.onclick = () => {
        history.select(e.jobId);
        interpBtn.disabled = !history.interpolationReady;
      };
      jobsList.appendChild(li);
    }
  }

  const poller = new JobPoller(client, (view) => {
    history.upsert(view);
    renderJobs();
    if (view.status === "done") void showResult(view);
    if (view.status === "failed") banner.textContent =
      `job ${view.job_id} failed: ${view.error}`;
  }, (_id, err) => showError(err));

  async function showResult(view: JobView): Promise<void> {
    const frames = view.artifacts["turntable"];
    if (frames && frames.length) {
      const scrub = root.querySelector<HTMLInputElement>("#scrub")!;
      const img = root.querySelector<HTMLImageElement>("#frame")!;
      scrub.max = String(frames.length - 1);
      scrub.oninput = () => { img.src = client.assetUrl(frames[Number(scrub.value)]); };
      img.src = client.assetUrl(frames[0]);
    }
    const grid = view.artifacts["density_grid"];
    if (grid && grid.length === 2) {
      const metaRes = await fetch(client.assetUrl(grid[1]));
      const meta = (await metaRes.json()) as DensityGridMeta;
      const bin = await client.fetchAsset(grid[0]);
      const mesh = marchingCubes(parseDensityGrid(meta,
        bin.buffer.slice(bin.byteOffset, bin.byteOffset + bin.byteLength) as ArrayBuffer));
      const meshCanvas = root.querySelector<HTMLCanvasElement>("#mesh")!;
      const azInput = root.querySelector<HTMLInputElement>("#mesh-az")!;
      const draw = () => drawMesh(meshCanvas, mesh, Number(azInput.value));
      azInput.oninput = draw;
      draw();
    }
    const reSketch = view.artifacts["re_sketch"];
    if (reSketch && reSketch.length) {
      await offerOverlay(reSketch[0]);
    }
    const morph = view.artifacts["frames"];
    if (morph && morph.length) {
      const slider = root.querySelector<HTMLInputElement>("#morph-slider")!;
      const img = root.querySelector<HTMLImageElement>("#morph-frame")!;
      slider.max = String(morph.length - 1);
      slider.oninput = () => { img.src = client.assetUrl(morph[Number(slider.value)]); };
      img.src = client.assetUrl(morph[0]);
    }
  }

  async function offerOverlay(assetPath: string): Promise<void> {
    const img = new Image();
    img.src = client.assetUrl(assetPath);
    await img.decode();
    const off = document.createElement("canvas");
    off.width = CANVAS_SIZE;
    off.height = CANVAS_SIZE;
    const octx = off.getContext("2d")!;
    octx.drawImage(img, 0, 0, CANVAS_SIZE, CANVAS_SIZE);
    const data = octx.getImageData(0, 0, CANVAS_SIZE, CANVAS_SIZE).data;
    const pixels = new Float32Array(CANVAS_SIZE * CANVAS_SIZE);
    for (let i = 0; i < pixels.length; i++) {
      pixels[i] = (data[4 * i] * 0.299 + data[4 * i + 1] * 0.587 + data[4 * i + 2] * 0.114) / 255;
    }
    const opacity = Number(root.querySelector<HTMLInputElement>("#opacity")!.value) / 100;
    state.setBackground({ url: assetPath, pixels, opacity });
    repaint();
  }

  async function submit(kind: "sketch_to_3d" | "roundtrip"): Promise<void> {
    banner.textContent = "";
    try {
      const view = await client.submitJob(kind, state.exportPng());
      history.upsert(view);
      renderJobs();
      poller.watch(view.job_id);
    } catch (err) {
      showError(err); // history unchanged on failure
    }
  }

  submitBtn.onclick = () => void submit("sketch_to_3d");
  roundtripBtn.onclick = () => void submit("roundtrip");
  interpBtn.onclick = () => {
    const [a, b] = history.selectedPair;
    const n = Number(root.querySelector<HTMLInputElement>("#interp-n")!.value);
    if (a && b) {
      client.interpolate(a, b, n)
        .then((view) => { history.upsert(view); renderJobs(); poller.watch(view.job_id); })
        .catch(showError);
    }
  };
  root.querySelector<HTMLButtonElement>("#undo")!.onclick = () => { state.undo(); repaint(); };
  root.querySelector<HTMLButtonElement>("#clear")!.onclick = () => { state.clear(); repaint(); };
  eraseBtn.onclick = () => { erasing = !erasing; eraseBtn.textContent = `erase: ${erasing ? "on" : "off"}`; };
  root.querySelector<HTMLInputElement>("#opacity")!.oninput = (e) => {
    const bg = state.background;
    if (bg) {
      state.setBackground({ ...bg, opacity: Number((e.target as HTMLInputElement).value) / 100 });
      repaint();
    }
  };

  let drawing = false;
  sketchCanvas.onpointerdown = (e) => {
    drawing = true;
    state.beginStroke(canvasPoint(sketchCanvas, e), erasing ? 8 : 2, erasing);
    repaint();
  };
  sketchCanvas.onpointermove = (e) => {
    if (!drawing) return;
    state.extendStroke(canvasPoint(sketchCanvas, e));
    repaint();
  };
  sketchCanvas.onpointerup = () => { drawing = false; };

  void history.refresh(client).then(renderJobs).catch(showError);
  repaint();
}

function canvasPoint(canvas: HTMLCanvasElement, e: PointerEvent): { x: number; y: number } {
  const rect = canvas.getBoundingClientRect();
  return {
    x: ((e.clientX - rect.left) / rect.width) * canvas.width,
    y: ((e.clientY - rect.top) / rect.height) * canvas.height,
  };
}

function drawMesh(canvas: HTMLCanvasElement, mesh: ReturnType<typeof marchingCubes>,
                  azimuth: number): void {
  const ctx = canvas.getContext("2d")!;
  ctx.fillStyle = "#fff";
  ctx.fillRect(0, 0, canvas.width, canvas.height);
  for (const tri of projectMesh(mesh, azimuth, 20, canvas.width)) {
    const g = Math.round(tri.shade * 200);
    ctx.fillStyle = `rgb(${g}, ${g}, ${g + 30})`;
    ctx.beginPath();
    ctx.moveTo(tri.points[0][0], tri.points[0][1]);
    ctx.lineTo(tri.points[1][0], tri.points[1][1]);
    ctx.lineTo(tri.points[2][0], tri.points[2][1]);
    ctx.closePath();
    ctx.fill();
  }
}
