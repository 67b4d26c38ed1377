/** Browser entry point: loads the container named by ?asset=, wires the
 * orbit controls and view toggles, and runs the render loop with an FPS
 * readout averaged over the last 60 frames.
 *
 * The default pose (azimuth 0, elevation 20, distance 2.5, fov 50) is the
 * first pose of the CPU orbit generator, so a 512x512 screenshot taken
 * right after load is directly comparable against frame_0000.png.
 */

import { httpFetcher, loadAssets } from "./assets.js";
import type { Camera } from "./camera.js";
import { createContext } from "./gl.js";
import { OrbitControls } from "./orbit.js";
import { defaultViewOptions, Renderer } from "./renderer.js";

function query(name: string): string | null {
  return new URLSearchParams(window.location.search).get(name);
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text = "",
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  if (text) node.textContent = text;
  return node;
}

function banner(message: string): void {
  const box = document.getElementById("banner") ?? document.body.appendChild(el("div", { id: "banner" }));
  box.textContent = message;
  (box as HTMLElement).style.display = "block";
}

async function boot(): Promise<void> {
  const assetBase = query("asset") ?? "asset";
  const size = Number(query("size") ?? "800");
  const stepParam = query("step");

  const canvas = document.getElementById("view") as HTMLCanvasElement;
  canvas.width = size;
  canvas.height = size;
  canvas.style.width = `${size}px`;
  canvas.style.height = `${size}px`;

  const opts = defaultViewOptions();
  if (stepParam !== null) {
    const s = Number(stepParam);
    if (!(s > 0)) {
      banner(`invalid step scale ${JSON.stringify(stepParam)}`);
      return;
    }
    opts.stepScale = s;
  }

  canvas.addEventListener("webglcontextlost", (e) => {
    e.preventDefault();
    banner("WebGL context lost; reload the page to continue");
  });

  let renderer: Renderer;
  let manifestSummary: string;
  try {
    const gl = createContext(canvas);
    const assets = await loadAssets(httpFetcher(assetBase));
    renderer = new Renderer(gl, assets);
    const g = assets.manifest.grid;
    manifestSummary =
      `grid ${g.n}^3 | blocks ${g.blocks} | m_bar ${g.m_bar} | r_bar ${g.r_bar} | ` +
      `occupied ${g.occupied} | mesh ${assets.manifest.mesh.triangles} tris`;
  } catch (err) {
    banner(err instanceof Error ? err.message : String(err));
    return;
  }

  const orbit = new OrbitControls({
    azimuthDeg: 0,
    elevationDeg: 20,
    distance: 2.5,
    target: [0, 0, 0],
  });

  // controls panel
  const panel = document.getElementById("panel")!;
  const status = el("div", { id: "status" });
  const fpsBox = el("div", { id: "fps" }, "fps: --");
  panel.append(status, fpsBox);
  status.textContent = manifestSummary;

  const addToggle = (label: string, value: boolean, onChange: (v: boolean) => void, disabled = false): void => {
    const wrap = el("label");
    const box = el("input", { type: "checkbox" }) as HTMLInputElement;
    box.checked = value;
    box.disabled = disabled;
    box.addEventListener("change", () => onChange(box.checked));
    wrap.append(box, document.createTextNode(" " + label));
    panel.append(wrap);
  };

  addToggle("mesh", opts.showMesh, (v) => (opts.showMesh = v));
  addToggle("volume", opts.showVolume, (v) => (opts.showVolume = v), !renderer.hasVolume);
  addToggle("wireframe", opts.wireframe, (v) => (opts.wireframe = v));
  addToggle("blocks", opts.showBlocks, (v) => (opts.showBlocks = v), !renderer.hasVolume);
  addToggle("fetch guard debug", opts.guardDebug, (v) => (opts.guardDebug = v), !renderer.hasVolume);
  addToggle("light background", false, (v) => {
    opts.background = v ? [1, 1, 1, 1] : [0, 0, 0, 0];
  });

  const addNumber = (label: string, value: number, step: string, onChange: (v: number) => void): HTMLInputElement => {
    const wrap = el("label");
    const box = el("input", { type: "number", step }) as HTMLInputElement;
    box.value = String(value);
    box.addEventListener("change", () => {
      const v = Number(box.value);
      if (Number.isFinite(v)) onChange(v);
    });
    wrap.append(document.createTextNode(label + " "), box);
    panel.append(wrap);
    return box;
  };

  addNumber("step scale", opts.stepScale, "0.05", (v) => {
    if (v > 0) opts.stepScale = v;
  });
  let fovDeg = 50;
  addNumber("fov", fovDeg, "1", (v) => {
    if (v > 0 && v < 180) fovDeg = v;
  });
  addNumber("render scale", 1, "0.25", (v) => {
    if (v > 0 && v <= 4) {
      canvas.width = Math.max(1, Math.round(size * v));
      canvas.height = Math.max(1, Math.round(size * v));
    }
  });

  const shot = el("button", {}, "screenshot");
  shot.addEventListener("click", () => {
    canvas.toBlob((blob) => {
      if (!blob) return;
      const a = el("a", { download: "frame.png" });
      a.href = URL.createObjectURL(blob);
      a.click();
      URL.revokeObjectURL(a.href);
    });
  });
  panel.append(shot);

  // orbit interaction
  let dragging = false;
  canvas.addEventListener("mousedown", () => (dragging = true));
  window.addEventListener("mouseup", () => (dragging = false));
  window.addEventListener("mousemove", (e) => {
    if (dragging) orbit.drag(e.movementX, e.movementY, canvas.width, canvas.height);
  });
  canvas.addEventListener("wheel", (e) => {
    e.preventDefault();
    orbit.wheel(e.deltaY);
  });
  canvas.addEventListener("dblclick", () => orbit.reset());

  // render loop with rolling FPS
  const stamps: number[] = [];
  const frame = (now: number): void => {
    stamps.push(now);
    if (stamps.length > 60) stamps.shift();
    if (stamps.length > 1) {
      const fps = ((stamps.length - 1) * 1000) / (stamps[stamps.length - 1] - stamps[0]);
      fpsBox.textContent = `fps: ${fps.toFixed(1)}`;
    }
    const cam: Camera = {
      position: orbit.position(),
      lookAt: [...orbit.state.target] as [number, number, number],
      up: [0, 1, 0],
      fovDeg,
      width: canvas.width,
      height: canvas.height,
    };
    renderer.render(cam, opts);
    requestAnimationFrame(frame);
  };
  requestAnimationFrame(frame);
}

boot().catch((err) => banner(err instanceof Error ? err.message : String(err)));
