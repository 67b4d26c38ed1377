/** Four-pass deferred renderer.
 *
 * Pass 1/2 rasterize the domain box into R32F ray-distance targets
 * (depth-min for entry, depth-max for exit, winding independent).
 * Pass 3 rasterizes the shaded mesh with its own ray distance.
 * Pass 4 marches the sparse volume between entry and exit, clamped to
 * the mesh surface, and composites over the configured background.
 * Wireframe and occupied-block overlays draw last, unoccluded.
 */

import type { LoadedAssets } from "./assets.js";
import { Camera, basis, tangents, viewProjection } from "./camera.js";
import {
  compileProgram,
  createBuffer,
  createRenderTarget,
  createUintTexture,
  createUnormTexture,
  RenderTarget,
} from "./gl.js";
import { occupiedBlocks } from "./occupancy.js";
import {
  BOX_FRAG,
  BOX_VERT,
  COMPOSITE_FRAG,
  FULLSCREEN_VERT,
  LINES_FRAG,
  LINES_VERT,
  MESH_FRAG,
  MESH_VERT,
} from "./shaders.js";

export interface ViewOptions {
  showMesh: boolean;
  showVolume: boolean;
  wireframe: boolean;
  showBlocks: boolean;
  guardDebug: boolean;
  stepScale: number;
  earlyStop: number;
  background: [number, number, number, number];
}

export function defaultViewOptions(): ViewOptions {
  return {
    showMesh: true,
    showVolume: true,
    wireframe: false,
    showBlocks: false,
    guardDebug: false,
    stepScale: 0.5,
    earlyStop: 1e-3,
    background: [0, 0, 0, 0],
  };
}

const BOX_INDICES = new Uint16Array([
  0, 2, 3, 0, 3, 1,
  4, 5, 7, 4, 7, 6,
  0, 4, 6, 0, 6, 2,
  1, 3, 7, 1, 7, 5,
  0, 1, 5, 0, 5, 4,
  2, 6, 7, 2, 7, 3,
]);

const CUBE_EDGES = new Uint16Array([
  0, 1, 1, 3, 3, 2, 2, 0,
  4, 5, 5, 7, 7, 6, 6, 4,
  0, 4, 1, 5, 2, 6, 3, 7,
]);

class Program {
  readonly handle: WebGLProgram;
  private locs = new Map<string, WebGLUniformLocation | null>();

  constructor(private gl: WebGL2RenderingContext, name: string, vert: string, frag: string) {
    this.handle = compileProgram(gl, name, vert, frag);
  }

  use(): void {
    this.gl.useProgram(this.handle);
  }

  loc(name: string): WebGLUniformLocation | null {
    if (!this.locs.has(name)) {
      this.locs.set(name, this.gl.getUniformLocation(this.handle, name));
    }
    return this.locs.get(name) ?? null;
  }
}

function corners(min: [number, number, number], max: [number, number, number]): Float32Array {
  const out = new Float32Array(24);
  for (let i = 0; i < 8; i++) {
    out[i * 3] = (i & 1) ? max[0] : min[0];
    out[i * 3 + 1] = (i & 2) ? max[1] : min[1];
    out[i * 3 + 2] = (i & 4) ? max[2] : min[2];
  }
  return out;
}

function uniqueEdges(triangles: Uint32Array): Uint32Array {
  const seen = new Set<number>();
  const out: number[] = [];
  const nv = 1 << 21;
  for (let f = 0; f < triangles.length; f += 3) {
    for (let e = 0; e < 3; e++) {
      const a = triangles[f + e];
      const b = triangles[f + ((e + 1) % 3)];
      const key = a < b ? a * nv + b : b * nv + a;
      if (!seen.has(key)) {
        seen.add(key);
        out.push(a, b);
      }
    }
  }
  return new Uint32Array(out);
}

export class Renderer {
  private gl: WebGL2RenderingContext;
  private assets: LoadedAssets;

  private boxProg: Program;
  private meshProg: Program;
  private compositeProg: Program;
  private linesProg: Program;

  private boxVao: WebGLVertexArrayObject;
  private meshVao: WebGLVertexArrayObject;
  private wireVao: WebGLVertexArrayObject;
  private blocksVao: WebGLVertexArrayObject;
  private emptyVao: WebGLVertexArrayObject;

  private meshVertexCount: number;
  private wireIndexCount: number;
  private blockCount: number;

  private meshTex: Record<string, WebGLTexture> = {};
  private envTex: WebGLTexture[] = [];
  private lutTex: WebGLTexture;
  private occTex: WebGLTexture | null = null;
  private occWidth = 1;
  private offsetsTex: WebGLTexture | null = null;
  private volTex: Record<string, WebGLTexture> = {};

  private tFront: RenderTarget | null = null;
  private tBack: RenderTarget | null = null;
  private gbuffer: RenderTarget | null = null;

  readonly hasVolume: boolean;
  private boundsMin: [number, number, number];
  private boundsMax: [number, number, number];
  private voxelEdge: number;
  private blockWorld: number;

  constructor(gl: WebGL2RenderingContext, assets: LoadedAssets) {
    this.gl = gl;
    this.assets = assets;
    const m = assets.manifest;
    this.hasVolume = m.volume !== null && assets.volMaps !== null;
    this.boundsMin = [...m.bounds.min] as [number, number, number];
    this.boundsMax = [...m.bounds.max] as [number, number, number];
    this.voxelEdge = (m.bounds.max[0] - m.bounds.min[0]) / m.grid.n;
    this.blockWorld = this.voxelEdge * m.grid.block;

    this.boxProg = new Program(gl, "box", BOX_VERT, BOX_FRAG);
    this.meshProg = new Program(gl, "mesh", MESH_VERT, MESH_FRAG);
    this.compositeProg = new Program(gl, "composite", FULLSCREEN_VERT, COMPOSITE_FRAG);
    this.linesProg = new Program(gl, "lines", LINES_VERT, LINES_FRAG);

    this.emptyVao = this.newVao();

    // domain box
    this.boxVao = this.newVao();
    gl.bindVertexArray(this.boxVao);
    createBuffer(gl, gl.ARRAY_BUFFER, corners(this.boundsMin, this.boundsMax));
    this.bindPosAttrib(this.boxProg.handle, 3, 0, 0);
    createBuffer(gl, gl.ELEMENT_ARRAY_BUFFER, BOX_INDICES);

    // mesh, expanded to per-corner vertices so each corner carries its uv
    const tris = assets.mesh.triangles;
    const pos = assets.mesh.positions;
    const uvs = assets.mesh.uvs;
    if (!uvs) throw new Error("mesh has no texture coordinates");
    this.meshVertexCount = tris.length;
    const interleaved = new Float32Array(tris.length * 5);
    for (let k = 0; k < tris.length; k++) {
      const v = tris[k];
      interleaved[k * 5] = pos[v * 3];
      interleaved[k * 5 + 1] = pos[v * 3 + 1];
      interleaved[k * 5 + 2] = pos[v * 3 + 2];
      interleaved[k * 5 + 3] = uvs[k * 2];
      interleaved[k * 5 + 4] = uvs[k * 2 + 1];
    }
    this.meshVao = this.newVao();
    gl.bindVertexArray(this.meshVao);
    createBuffer(gl, gl.ARRAY_BUFFER, interleaved);
    const aPos = gl.getAttribLocation(this.meshProg.handle, "aPos");
    const aUv = gl.getAttribLocation(this.meshProg.handle, "aUv");
    gl.enableVertexAttribArray(aPos);
    gl.vertexAttribPointer(aPos, 3, gl.FLOAT, false, 20, 0);
    gl.enableVertexAttribArray(aUv);
    gl.vertexAttribPointer(aUv, 2, gl.FLOAT, false, 20, 12);

    // wireframe: unique mesh edges over the shared position buffer
    const edges = uniqueEdges(tris);
    this.wireIndexCount = edges.length;
    this.wireVao = this.newVao();
    gl.bindVertexArray(this.wireVao);
    createBuffer(gl, gl.ARRAY_BUFFER, new Float32Array(pos));
    this.bindPosAttrib(this.linesProg.handle, 3, 0, 0);
    createBuffer(gl, gl.ELEMENT_ARRAY_BUFFER, edges);

    // occupied block outlines, one instanced unit cube per block
    const blocks = this.hasVolume
      ? occupiedBlocks(assets.occupancy, m.grid.n, m.grid.block)
      : [];
    this.blockCount = blocks.length;
    this.blocksVao = this.newVao();
    gl.bindVertexArray(this.blocksVao);
    createBuffer(gl, gl.ARRAY_BUFFER, corners([0, 0, 0], [1, 1, 1]));
    this.bindPosAttrib(this.linesProg.handle, 3, 0, 0);
    const offsets = new Float32Array(this.blockCount * 3);
    blocks.forEach((b, i) => {
      offsets[i * 3] = b[0] * this.blockWorld;
      offsets[i * 3 + 1] = b[1] * this.blockWorld;
      offsets[i * 3 + 2] = b[2] * this.blockWorld;
    });
    createBuffer(gl, gl.ARRAY_BUFFER, offsets);
    const aOffset = gl.getAttribLocation(this.linesProg.handle, "aOffset");
    gl.enableVertexAttribArray(aOffset);
    gl.vertexAttribPointer(aOffset, 3, gl.FLOAT, false, 0, 0);
    gl.vertexAttribDivisor(aOffset, 1);
    createBuffer(gl, gl.ELEMENT_ARRAY_BUFFER, CUBE_EDGES);
    gl.bindVertexArray(null);

    // textures
    for (const name of ["normal", "diffuse", "tint", "weights", "metallic"] as const) {
      const img = assets.meshMaps[name];
      this.meshTex[name] = createUnormTexture(gl, img, gl.LINEAR);
    }
    this.envTex = assets.envMaps.map((img) => createUnormTexture(gl, img, gl.NEAREST));
    this.lutTex = createUnormTexture(gl, assets.lut, gl.NEAREST);

    if (this.hasVolume && assets.offsets && assets.volMaps) {
      const occBytes = assets.occupancy;
      this.occWidth = Math.min(2048, occBytes.length);
      const occH = Math.ceil(occBytes.length / this.occWidth);
      const padded = new Uint8Array(this.occWidth * occH);
      padded.set(occBytes);
      this.occTex = createUintTexture(gl, {
        width: this.occWidth,
        height: occH,
        channels: 1,
        data: padded,
      });
      const off = assets.offsets;
      const rgba = new Uint8Array(off.width * off.height * 4);
      for (let i = 0; i < off.width * off.height; i++) {
        rgba[i * 4] = off.data[i * 3];
        rgba[i * 4 + 1] = off.data[i * 3 + 1];
        rgba[i * 4 + 2] = off.data[i * 3 + 2];
        rgba[i * 4 + 3] = 255;
      }
      this.offsetsTex = createUintTexture(gl, {
        width: off.width,
        height: off.height,
        channels: 4,
        data: rgba,
      });
      for (const name of ["density_metal", "normal", "diffuse", "tint", "weights"] as const) {
        this.volTex[name] = createUnormTexture(gl, assets.volMaps[name], gl.NEAREST);
      }
    }
  }

  private newVao(): WebGLVertexArrayObject {
    const vao = this.gl.createVertexArray();
    if (!vao) throw new Error("createVertexArray failed");
    return vao;
  }

  private bindPosAttrib(program: WebGLProgram, size: number, stride: number, offset: number): void {
    const gl = this.gl;
    const loc = gl.getAttribLocation(program, "aPos");
    gl.enableVertexAttribArray(loc);
    gl.vertexAttribPointer(loc, size, gl.FLOAT, false, stride, offset);
  }

  private destroyTarget(t: RenderTarget | null): void {
    if (!t) return;
    this.gl.deleteFramebuffer(t.framebuffer);
    for (const tex of t.textures) this.gl.deleteTexture(tex);
  }

  private ensureTargets(width: number, height: number): void {
    if (this.tFront && this.tFront.width === width && this.tFront.height === height) return;
    const gl = this.gl;
    this.destroyTarget(this.tFront);
    this.destroyTarget(this.tBack);
    this.destroyTarget(this.gbuffer);
    this.tFront = createRenderTarget(gl, width, height, [gl.R32F]);
    this.tBack = createRenderTarget(gl, width, height, [gl.R32F]);
    this.gbuffer = createRenderTarget(gl, width, height, [gl.RGBA8, gl.R32F]);
    for (const t of [this.tFront, this.tBack, this.gbuffer]) {
      gl.bindFramebuffer(gl.FRAMEBUFFER, t.framebuffer);
      gl.clearColor(0, 0, 0, 0);
      gl.clear(gl.COLOR_BUFFER_BIT | gl.DEPTH_BUFFER_BIT);
    }
    gl.bindFramebuffer(gl.FRAMEBUFFER, null);
  }

  private setRange(prog: Program, name: string, lo: number[], hi: number[]): void {
    const gl = this.gl;
    if (lo.length === 1) {
      gl.uniform1f(prog.loc(`${name}Lo`), lo[0]);
      gl.uniform1f(prog.loc(`${name}Hi`), hi[0]);
    } else if (lo.length === 3) {
      gl.uniform3fv(prog.loc(`${name}Lo`), lo);
      gl.uniform3fv(prog.loc(`${name}Hi`), hi);
    } else {
      gl.uniform4fv(prog.loc(`${name}Lo`), lo);
      gl.uniform4fv(prog.loc(`${name}Hi`), hi);
    }
  }

  private bindTexture(unit: number, tex: WebGLTexture | null): void {
    const gl = this.gl;
    gl.activeTexture(gl.TEXTURE0 + unit);
    gl.bindTexture(gl.TEXTURE_2D, tex);
  }

  private setShadeUniforms(prog: Program, envUnit: number, lutUnit: number): void {
    const gl = this.gl;
    const m = this.assets.manifest;
    const envLo: number[] = [];
    const envHi: number[] = [];
    for (let i = 0; i < 4; i++) {
      this.bindTexture(envUnit + i, this.envTex[i]);
      gl.uniform1i(prog.loc(`uEnv${i}`), envUnit + i);
      envLo.push(...m.env.maps[i].lo);
      envHi.push(...m.env.maps[i].hi);
    }
    gl.uniform3fv(prog.loc("uEnvLo[0]"), envLo);
    gl.uniform3fv(prog.loc("uEnvHi[0]"), envHi);
    gl.uniform1i(prog.loc("uEnvEdge"), m.env.edge);
    this.bindTexture(lutUnit, this.lutTex);
    gl.uniform1i(prog.loc("uLut"), lutUnit);
    gl.uniform1i(prog.loc("uLutSize"), m.lut.size);
    gl.uniform1f(prog.loc("uLutLo"), m.lut.lo[0]);
    gl.uniform1f(prog.loc("uLutHi"), m.lut.hi[0]);
  }

  /** Draw one frame with the given camera; canvas size sets the resolution. */
  render(cam: Camera, opts: ViewOptions): void {
    const gl = this.gl;
    const width = gl.drawingBufferWidth;
    const height = gl.drawingBufferHeight;
    this.ensureTargets(width, height);
    const sized: Camera = { ...cam, width, height };
    const vp = viewProjection(sized);
    const { right, up, fwd } = basis(sized);
    const { tanH, tanV } = tangents(sized);
    const eye = cam.position;
    const m = this.assets.manifest;

    gl.viewport(0, 0, width, height);
    gl.disable(gl.BLEND);
    gl.disable(gl.CULL_FACE);
    gl.enable(gl.DEPTH_TEST);
    gl.depthMask(true);

    // passes 1 and 2: domain box entry and exit distances
    const marchNeeded = this.hasVolume && opts.showVolume;
    if (marchNeeded) {
      this.boxProg.use();
      gl.uniformMatrix4fv(this.boxProg.loc("uViewProj"), false, vp);
      gl.uniform3fv(this.boxProg.loc("uEye"), eye);
      gl.bindVertexArray(this.boxVao);

      gl.bindFramebuffer(gl.FRAMEBUFFER, this.tFront!.framebuffer);
      gl.clearColor(1e30, 0, 0, 1);
      gl.clearDepth(1);
      gl.depthFunc(gl.LESS);
      gl.clear(gl.COLOR_BUFFER_BIT | gl.DEPTH_BUFFER_BIT);
      gl.drawElements(gl.TRIANGLES, BOX_INDICES.length, gl.UNSIGNED_SHORT, 0);

      gl.bindFramebuffer(gl.FRAMEBUFFER, this.tBack!.framebuffer);
      gl.clearColor(0, 0, 0, 1);
      gl.clearDepth(0);
      gl.depthFunc(gl.GREATER);
      gl.clear(gl.COLOR_BUFFER_BIT | gl.DEPTH_BUFFER_BIT);
      gl.drawElements(gl.TRIANGLES, BOX_INDICES.length, gl.UNSIGNED_SHORT, 0);
    }

    // pass 3: shaded mesh with per-pixel ray distance
    gl.bindFramebuffer(gl.FRAMEBUFFER, this.gbuffer!.framebuffer);
    gl.clearColor(0, 0, 0, 0);
    gl.clearDepth(1);
    gl.depthFunc(gl.LESS);
    gl.clear(gl.COLOR_BUFFER_BIT | gl.DEPTH_BUFFER_BIT);
    if (opts.showMesh && this.meshVertexCount > 0) {
      this.meshProg.use();
      gl.uniformMatrix4fv(this.meshProg.loc("uViewProj"), false, vp);
      gl.uniform3fv(this.meshProg.loc("uEye"), eye);
      const units: [string, string][] = [
        ["normal", "uMapNormal"],
        ["diffuse", "uMapDiffuse"],
        ["tint", "uMapTint"],
        ["weights", "uMapWeights"],
        ["metallic", "uMapMetal"],
      ];
      units.forEach(([name, uni], i) => {
        this.bindTexture(i, this.meshTex[name]);
        gl.uniform1i(this.meshProg.loc(uni), i);
      });
      this.setRange(this.meshProg, "uNormal", m.maps.normal.lo, m.maps.normal.hi);
      this.setRange(this.meshProg, "uDiffuse", m.maps.diffuse.lo, m.maps.diffuse.hi);
      this.setRange(this.meshProg, "uTint", m.maps.tint.lo, m.maps.tint.hi);
      this.setRange(this.meshProg, "uWeights", m.maps.weights.lo, m.maps.weights.hi);
      this.setRange(this.meshProg, "uMetal", m.maps.metallic.lo, m.maps.metallic.hi);
      this.setShadeUniforms(this.meshProg, 5, 9);
      gl.enable(gl.CULL_FACE);
      gl.cullFace(gl.BACK);
      gl.frontFace(gl.CW);
      gl.bindVertexArray(this.meshVao);
      gl.drawArrays(gl.TRIANGLES, 0, this.meshVertexCount);
      gl.disable(gl.CULL_FACE);
    }

    // pass 4: march and composite to the canvas
    gl.bindFramebuffer(gl.FRAMEBUFFER, null);
    gl.disable(gl.DEPTH_TEST);
    const p = this.compositeProg;
    p.use();
    gl.uniform2f(p.loc("uResolution"), width, height);
    gl.uniform3fv(p.loc("uEye"), eye);
    gl.uniform3fv(p.loc("uRight"), right);
    gl.uniform3fv(p.loc("uUp"), up);
    gl.uniform3fv(p.loc("uFwd"), fwd);
    gl.uniform1f(p.loc("uTanH"), tanH);
    gl.uniform1f(p.loc("uTanV"), tanV);
    this.bindTexture(0, this.tFront!.textures[0]);
    this.bindTexture(1, this.tBack!.textures[0]);
    this.bindTexture(2, this.gbuffer!.textures[0]);
    this.bindTexture(3, this.gbuffer!.textures[1]);
    gl.uniform1i(p.loc("uTFront"), 0);
    gl.uniform1i(p.loc("uTBack"), 1);
    gl.uniform1i(p.loc("uMeshColor"), 2);
    gl.uniform1i(p.loc("uMeshDepth"), 3);
    gl.uniform1i(p.loc("uHasVolume"), this.hasVolume ? 1 : 0);
    gl.uniform1i(p.loc("uShowMesh"), opts.showMesh ? 1 : 0);
    gl.uniform1i(p.loc("uShowVolume"), opts.showVolume ? 1 : 0);
    gl.uniform1i(p.loc("uGuardDebug"), opts.guardDebug ? 1 : 0);
    gl.uniform4fv(p.loc("uBackground"), opts.background);
    gl.uniform1i(p.loc("uGridN"), m.grid.n);
    gl.uniform1i(p.loc("uBlock"), m.grid.block);
    gl.uniform1i(p.loc("uMBar"), Math.max(m.grid.m_bar, 1));
    gl.uniform1i(p.loc("uRBar"), Math.max(m.grid.r_bar, 1));
    gl.uniform3fv(p.loc("uBoundsMin"), this.boundsMin);
    gl.uniform3fv(p.loc("uBoundsMax"), this.boundsMax);
    gl.uniform1f(p.loc("uVoxelEdge"), this.voxelEdge);
    gl.uniform1f(p.loc("uStepScale"), opts.stepScale);
    gl.uniform1f(p.loc("uEarlyStop"), opts.earlyStop);
    this.bindTexture(4, this.occTex);
    this.bindTexture(5, this.offsetsTex);
    gl.uniform1i(p.loc("uOccupancy"), 4);
    gl.uniform1i(p.loc("uOccWidth"), this.occWidth);
    gl.uniform1i(p.loc("uOffsets"), 5);
    const volUnits: [string, string][] = [
      ["density_metal", "uVolDensityMetal"],
      ["normal", "uVolNormal"],
      ["diffuse", "uVolDiffuse"],
      ["tint", "uVolTint"],
      ["weights", "uVolWeights"],
    ];
    volUnits.forEach(([name, uni], i) => {
      this.bindTexture(6 + i, this.volTex[name] ?? null);
      gl.uniform1i(p.loc(uni), 6 + i);
    });
    if (m.volume) {
      const vm = m.volume.maps;
      this.setRange(p, "uVolDM", vm.density_metal.lo, vm.density_metal.hi);
      this.setRange(p, "uVolNormal", vm.normal.lo, vm.normal.hi);
      this.setRange(p, "uVolDiffuse", vm.diffuse.lo, vm.diffuse.hi);
      this.setRange(p, "uVolTint", vm.tint.lo, vm.tint.hi);
      this.setRange(p, "uVolWeights", vm.weights.lo, vm.weights.hi);
    }
    this.setShadeUniforms(p, 11, 15);
    gl.bindVertexArray(this.emptyVao);
    gl.drawArrays(gl.TRIANGLES, 0, 3);

    // overlays
    if (opts.wireframe || (opts.showBlocks && this.blockCount > 0)) {
      this.linesProg.use();
      gl.uniformMatrix4fv(this.linesProg.loc("uViewProj"), false, vp);
      gl.enable(gl.BLEND);
      gl.blendFunc(gl.SRC_ALPHA, gl.ONE_MINUS_SRC_ALPHA);
      if (opts.wireframe) {
        gl.uniform4f(this.linesProg.loc("uColor"), 0.15, 0.85, 0.45, 0.55);
        gl.uniform1f(this.linesProg.loc("uScale"), 1);
        gl.uniform3f(this.linesProg.loc("uBase"), 0, 0, 0);
        gl.bindVertexArray(this.wireVao);
        const aOffset = gl.getAttribLocation(this.linesProg.handle, "aOffset");
        gl.vertexAttrib3f(aOffset, 0, 0, 0);
        gl.drawElements(gl.LINES, this.wireIndexCount, gl.UNSIGNED_INT, 0);
      }
      if (opts.showBlocks && this.blockCount > 0) {
        gl.uniform4f(this.linesProg.loc("uColor"), 1.0, 0.65, 0.1, 0.85);
        gl.uniform1f(this.linesProg.loc("uScale"), this.blockWorld);
        gl.uniform3fv(this.linesProg.loc("uBase"), this.boundsMin);
        gl.bindVertexArray(this.blocksVao);
        gl.drawElementsInstanced(gl.LINES, CUBE_EDGES.length, gl.UNSIGNED_SHORT, 0, this.blockCount);
      }
      gl.disable(gl.BLEND);
    }
    gl.bindVertexArray(null);
  }
}
