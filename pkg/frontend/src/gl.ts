/** Thin WebGL2 wrappers: program linking with readable errors, texture
 * uploads for the container payloads, and framebuffer setup. Float color
 * targets require EXT_color_buffer_float, checked once at context setup.
 */

export function createContext(canvas: HTMLCanvasElement): WebGL2RenderingContext {
  const gl = canvas.getContext("webgl2", {
    alpha: true,
    antialias: false,
    premultipliedAlpha: true,
    preserveDrawingBuffer: true,
  });
  if (!gl) {
    throw new Error("WebGL2 is not available in this browser");
  }
  if (!gl.getExtension("EXT_color_buffer_float")) {
    throw new Error("EXT_color_buffer_float is not available; float depth targets are required");
  }
  return gl;
}

export function compileProgram(
  gl: WebGL2RenderingContext,
  name: string,
  vertSrc: string,
  fragSrc: string,
): WebGLProgram {
  const compile = (kind: number, src: string, label: string): WebGLShader => {
    const shader = gl.createShader(kind);
    if (!shader) throw new Error(`${name}: createShader failed`);
    gl.shaderSource(shader, src);
    gl.compileShader(shader);
    if (!gl.getShaderParameter(shader, gl.COMPILE_STATUS)) {
      const log = gl.getShaderInfoLog(shader);
      gl.deleteShader(shader);
      throw new Error(`${name} ${label} shader: ${log}`);
    }
    return shader;
  };
  const vs = compile(gl.VERTEX_SHADER, vertSrc, "vertex");
  const fs = compile(gl.FRAGMENT_SHADER, fragSrc, "fragment");
  const program = gl.createProgram();
  if (!program) throw new Error(`${name}: createProgram failed`);
  gl.attachShader(program, vs);
  gl.attachShader(program, fs);
  gl.linkProgram(program);
  gl.deleteShader(vs);
  gl.deleteShader(fs);
  if (!gl.getProgramParameter(program, gl.LINK_STATUS)) {
    const log = gl.getProgramInfoLog(program);
    gl.deleteProgram(program);
    throw new Error(`${name} link: ${log}`);
  }
  return program;
}

export interface TextureSpec {
  width: number;
  height: number;
  /** 1, 3, or 4 interleaved u8 channels. */
  channels: number;
  data: Uint8Array;
}

/** Upload u8 image data as a normalized texture (reads return q/255). */
export function createUnormTexture(
  gl: WebGL2RenderingContext,
  spec: TextureSpec,
  filter: number,
): WebGLTexture {
  const tex = gl.createTexture();
  if (!tex) throw new Error("createTexture failed");
  gl.bindTexture(gl.TEXTURE_2D, tex);
  gl.pixelStorei(gl.UNPACK_ALIGNMENT, 1);
  const formats: Record<number, [number, number]> = {
    1: [gl.R8, gl.RED],
    3: [gl.RGB8, gl.RGB],
    4: [gl.RGBA8, gl.RGBA],
  };
  const pair = formats[spec.channels];
  if (!pair) throw new Error(`unsupported channel count ${spec.channels}`);
  gl.texImage2D(gl.TEXTURE_2D, 0, pair[0], spec.width, spec.height, 0, pair[1], gl.UNSIGNED_BYTE, spec.data);
  gl.texParameteri(gl.TEXTURE_2D, gl.TEXTURE_MIN_FILTER, filter);
  gl.texParameteri(gl.TEXTURE_2D, gl.TEXTURE_MAG_FILTER, filter);
  gl.texParameteri(gl.TEXTURE_2D, gl.TEXTURE_WRAP_S, gl.CLAMP_TO_EDGE);
  gl.texParameteri(gl.TEXTURE_2D, gl.TEXTURE_WRAP_T, gl.CLAMP_TO_EDGE);
  return tex;
}

/** Upload u8 data as an unsigned integer texture for texelFetch. */
export function createUintTexture(
  gl: WebGL2RenderingContext,
  spec: TextureSpec,
): WebGLTexture {
  const tex = gl.createTexture();
  if (!tex) throw new Error("createTexture failed");
  gl.bindTexture(gl.TEXTURE_2D, tex);
  gl.pixelStorei(gl.UNPACK_ALIGNMENT, 1);
  const formats: Record<number, [number, number]> = {
    1: [gl.R8UI, gl.RED_INTEGER],
    4: [gl.RGBA8UI, gl.RGBA_INTEGER],
  };
  const pair = formats[spec.channels];
  if (!pair) throw new Error(`unsupported channel count ${spec.channels}`);
  gl.texImage2D(gl.TEXTURE_2D, 0, pair[0], spec.width, spec.height, 0, pair[1], gl.UNSIGNED_BYTE, spec.data);
  gl.texParameteri(gl.TEXTURE_2D, gl.TEXTURE_MIN_FILTER, gl.NEAREST);
  gl.texParameteri(gl.TEXTURE_2D, gl.TEXTURE_MAG_FILTER, gl.NEAREST);
  gl.texParameteri(gl.TEXTURE_2D, gl.TEXTURE_WRAP_S, gl.CLAMP_TO_EDGE);
  gl.texParameteri(gl.TEXTURE_2D, gl.TEXTURE_WRAP_T, gl.CLAMP_TO_EDGE);
  return tex;
}

export interface RenderTarget {
  framebuffer: WebGLFramebuffer;
  textures: WebGLTexture[];
  width: number;
  height: number;
}

/** Offscreen framebuffer with the given color formats plus a depth buffer. */
export function createRenderTarget(
  gl: WebGL2RenderingContext,
  width: number,
  height: number,
  formats: number[],
): RenderTarget {
  const framebuffer = gl.createFramebuffer();
  if (!framebuffer) throw new Error("createFramebuffer failed");
  gl.bindFramebuffer(gl.FRAMEBUFFER, framebuffer);
  const textures: WebGLTexture[] = [];
  const attachments: number[] = [];
  formats.forEach((internal, i) => {
    const tex = gl.createTexture();
    if (!tex) throw new Error("createTexture failed");
    gl.bindTexture(gl.TEXTURE_2D, tex);
    gl.texStorage2D(gl.TEXTURE_2D, 1, internal, width, height);
    gl.texParameteri(gl.TEXTURE_2D, gl.TEXTURE_MIN_FILTER, gl.NEAREST);
    gl.texParameteri(gl.TEXTURE_2D, gl.TEXTURE_MAG_FILTER, gl.NEAREST);
    gl.framebufferTexture2D(gl.FRAMEBUFFER, gl.COLOR_ATTACHMENT0 + i, gl.TEXTURE_2D, tex, 0);
    textures.push(tex);
    attachments.push(gl.COLOR_ATTACHMENT0 + i);
  });
  const depth = gl.createRenderbuffer();
  gl.bindRenderbuffer(gl.RENDERBUFFER, depth);
  gl.renderbufferStorage(gl.RENDERBUFFER, gl.DEPTH_COMPONENT24, width, height);
  gl.framebufferRenderbuffer(gl.FRAMEBUFFER, gl.DEPTH_ATTACHMENT, gl.RENDERBUFFER, depth);
  gl.drawBuffers(attachments);
  const status = gl.checkFramebufferStatus(gl.FRAMEBUFFER);
  if (status !== gl.FRAMEBUFFER_COMPLETE) {
    throw new Error(`framebuffer incomplete: 0x${status.toString(16)}`);
  }
  gl.bindFramebuffer(gl.FRAMEBUFFER, null);
  return { framebuffer, textures, width, height };
}

export function createBuffer(
  gl: WebGL2RenderingContext,
  target: number,
  data: ArrayBufferView,
): WebGLBuffer {
  const buf = gl.createBuffer();
  if (!buf) throw new Error("createBuffer failed");
  gl.bindBuffer(target, buf);
  gl.bufferData(target, data, gl.STATIC_DRAW);
  return buf;
}
