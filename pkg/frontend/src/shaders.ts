/** GLSL 300 es sources for the four passes plus overlays.
 *
 * The fragment math mirrors the CPU renderer: manual per-face cube map
 * bilinear (no cross-face filtering), manual LUT bilinear, nearest-voxel
 * brick fetches behind an occupancy guard, midpoint marching with
 * per-ray uniform step counts, and the shared clamp + sRGB tone map.
 * All quantization ranges arrive as uniforms read from the manifest.
 */

export const FULLSCREEN_VERT = `#version 300 es
void main() {
  // single oversized triangle covering the viewport
  vec2 p = vec2((gl_VertexID == 1) ? 3.0 : -1.0, (gl_VertexID == 2) ? 3.0 : -1.0);
  gl_Position = vec4(p, 0.0, 1.0);
}
`;

export const BOX_VERT = `#version 300 es
in vec3 aPos;
uniform mat4 uViewProj;
out vec3 vWorld;
void main() {
  vWorld = aPos;
  gl_Position = uViewProj * vec4(aPos, 1.0);
}
`;

export const BOX_FRAG = `#version 300 es
precision highp float;
in vec3 vWorld;
uniform vec3 uEye;
out vec4 outT;
void main() {
  outT = vec4(length(vWorld - uEye), 0.0, 0.0, 1.0);
}
`;

/** Shared shading library: cube strips, LUT, tone map. */
const SHADE_LIB = `
uniform sampler2D uEnv0;
uniform sampler2D uEnv1;
uniform sampler2D uEnv2;
uniform sampler2D uEnv3;
uniform vec3 uEnvLo[4];
uniform vec3 uEnvHi[4];
uniform int uEnvEdge;
uniform sampler2D uLut;
uniform int uLutSize;
uniform float uLutLo;
uniform float uLutHi;

vec3 toneMap(vec3 c) {
  c = clamp(c, 0.0, 1.0);
  vec3 hi = 1.055 * pow(c, vec3(1.0 / 2.4)) - 0.055;
  vec3 lo = c * 12.92;
  vec3 o = mix(hi, lo, step(c, vec3(0.0031308)));
  return clamp(o, 0.0, 1.0);
}

// face index and in-face texel coords for a unit direction; ties x, y, z
void faceUv(vec3 d, out int face, out float x, out float y) {
  vec3 ad = abs(d);
  float major; float b; float c; int axis;
  if (ad.x >= ad.y && ad.x >= ad.z) { axis = 0; major = d.x; b = d.y; c = d.z; }
  else if (ad.y >= ad.z) { axis = 1; major = d.y; b = d.x; c = d.z; }
  else { axis = 2; major = d.z; b = d.x; c = d.y; }
  face = axis * 2 + ((major < 0.0) ? 1 : 0);
  float am = abs(major);
  float e = float(uEnvEdge);
  x = ((b / am + 1.0) * 0.5) * e - 0.5;
  y = ((c / am + 1.0) * 0.5) * e - 0.5;
}

// bilinear fetch inside one face of a vertically stacked strip texture
vec3 stripSample(sampler2D strip, int face, float x, float y) {
  float e1 = float(uEnvEdge) - 1.0;
  x = clamp(x, 0.0, e1);
  y = clamp(y, 0.0, e1);
  int x0 = min(int(floor(x)), max(uEnvEdge - 2, 0));
  int y0 = min(int(floor(y)), max(uEnvEdge - 2, 0));
  int x1 = min(x0 + 1, uEnvEdge - 1);
  int y1 = min(y0 + 1, uEnvEdge - 1);
  float fx = x - float(x0);
  float fy = y - float(y0);
  int row = face * uEnvEdge;
  vec3 v00 = texelFetch(strip, ivec2(x0, row + y0), 0).rgb;
  vec3 v10 = texelFetch(strip, ivec2(x1, row + y0), 0).rgb;
  vec3 v01 = texelFetch(strip, ivec2(x0, row + y1), 0).rgb;
  vec3 v11 = texelFetch(strip, ivec2(x1, row + y1), 0).rgb;
  vec3 top = v00 + (v10 - v00) * fx;
  vec3 bot = v01 + (v11 - v01) * fx;
  return top + (bot - top) * fy;
}

float lutSample(float cosTheta, float metallic) {
  float n = float(uLutSize - 1);
  float x = clamp(cosTheta, 0.0, 1.0) * n;
  float y = clamp(metallic, 0.0, 1.0) * n;
  int x0 = min(int(floor(x)), uLutSize - 2);
  int y0 = min(int(floor(y)), uLutSize - 2);
  float fx = x - float(x0);
  float fy = y - float(y0);
  float v00 = texelFetch(uLut, ivec2(x0, y0), 0).r;
  float v10 = texelFetch(uLut, ivec2(x0 + 1, y0), 0).r;
  float v01 = texelFetch(uLut, ivec2(x0, y0 + 1), 0).r;
  float v11 = texelFetch(uLut, ivec2(x0 + 1, y0 + 1), 0).r;
  float top = v00 + (v10 - v00) * fx;
  float bot = v01 + (v11 - v01) * fx;
  float q = top + (bot - top) * fy;
  return uLutLo + q * (uLutHi - uLutLo);
}

// diffuse plus tinted, attenuated specular from the four basis maps
vec3 shadeSample(vec3 n, vec3 wo, vec3 diffuse, vec3 tint, vec4 weights, float metallic) {
  float cosTheta = clamp(dot(wo, n), 0.0, 1.0);
  vec3 wr = 2.0 * dot(wo, n) * n - wo;
  int face; float x; float y;
  faceUv(wr, face, x, y);
  vec3 b0 = uEnvLo[0] + stripSample(uEnv0, face, x, y) * (uEnvHi[0] - uEnvLo[0]);
  vec3 b1 = uEnvLo[1] + stripSample(uEnv1, face, x, y) * (uEnvHi[1] - uEnvLo[1]);
  vec3 b2 = uEnvLo[2] + stripSample(uEnv2, face, x, y) * (uEnvHi[2] - uEnvLo[2]);
  vec3 b3 = uEnvLo[3] + stripSample(uEnv3, face, x, y) * (uEnvHi[3] - uEnvLo[3]);
  vec3 spec = clamp(weights.x * b0 + weights.y * b1 + weights.z * b2 + weights.w * b3, 0.0, 1.0);
  float a = lutSample(cosTheta, metallic);
  return toneMap(diffuse + tint * (a * spec));
}
`;

export const MESH_VERT = `#version 300 es
in vec3 aPos;
in vec2 aUv;
uniform mat4 uViewProj;
out vec2 vUv;
out vec3 vWorld;
void main() {
  vUv = aUv;
  vWorld = aPos;
  gl_Position = uViewProj * vec4(aPos, 1.0);
}
`;

export const MESH_FRAG = `#version 300 es
precision highp float;
precision highp int;
in vec2 vUv;
in vec3 vWorld;
uniform vec3 uEye;
uniform sampler2D uMapNormal;
uniform sampler2D uMapDiffuse;
uniform sampler2D uMapTint;
uniform sampler2D uMapWeights;
uniform sampler2D uMapMetal;
uniform vec3 uNormalLo; uniform vec3 uNormalHi;
uniform vec3 uDiffuseLo; uniform vec3 uDiffuseHi;
uniform vec3 uTintLo; uniform vec3 uTintHi;
uniform vec4 uWeightsLo; uniform vec4 uWeightsHi;
uniform float uMetalLo; uniform float uMetalHi;
${SHADE_LIB}
layout(location = 0) out vec4 outColor;
layout(location = 1) out vec4 outDepth;
void main() {
  vec3 enc = uNormalLo + texture(uMapNormal, vUv).rgb * (uNormalHi - uNormalLo);
  vec3 n = enc * 2.0 - 1.0;
  float len = length(n);
  n = (len > 1e-12) ? n / len : vec3(0.0, 0.0, 1.0);
  vec3 diffuse = uDiffuseLo + texture(uMapDiffuse, vUv).rgb * (uDiffuseHi - uDiffuseLo);
  vec3 tint = uTintLo + texture(uMapTint, vUv).rgb * (uTintHi - uTintLo);
  vec4 weights = uWeightsLo + texture(uMapWeights, vUv) * (uWeightsHi - uWeightsLo);
  float metal = uMetalLo + texture(uMapMetal, vUv).r * (uMetalHi - uMetalLo);
  vec3 wo = normalize(uEye - vWorld);
  outColor = vec4(shadeSample(n, wo, diffuse, tint, weights, metal), 1.0);
  outDepth = vec4(length(vWorld - uEye), 0.0, 0.0, 1.0);
}
`;

export const COMPOSITE_FRAG = `#version 300 es
precision highp float;
precision highp int;

uniform vec2 uResolution;
uniform vec3 uEye;
uniform vec3 uRight;
uniform vec3 uUp;
uniform vec3 uFwd;
uniform float uTanH;
uniform float uTanV;

uniform sampler2D uTFront;
uniform sampler2D uTBack;
uniform sampler2D uMeshColor;
uniform sampler2D uMeshDepth;

uniform int uHasVolume;
uniform int uShowMesh;
uniform int uShowVolume;
uniform int uGuardDebug;
uniform vec4 uBackground;

uniform int uGridN;
uniform int uBlock;
uniform int uMBar;
uniform int uRBar;
uniform vec3 uBoundsMin;
uniform vec3 uBoundsMax;
uniform float uVoxelEdge;
uniform float uStepScale;
uniform float uEarlyStop;

uniform highp usampler2D uOccupancy;
uniform int uOccWidth;
uniform highp usampler2D uOffsets;

uniform sampler2D uVolDensityMetal;
uniform sampler2D uVolNormal;
uniform sampler2D uVolDiffuse;
uniform sampler2D uVolTint;
uniform sampler2D uVolWeights;
uniform vec3 uVolDMLo; uniform vec3 uVolDMHi;
uniform vec3 uVolNormalLo; uniform vec3 uVolNormalHi;
uniform vec3 uVolDiffuseLo; uniform vec3 uVolDiffuseHi;
uniform vec3 uVolTintLo; uniform vec3 uVolTintHi;
uniform vec4 uVolWeightsLo; uniform vec4 uVolWeightsHi;

${SHADE_LIB}

out vec4 outColor;

bool gGuardTripped = false;

bool occupied(ivec3 v) {
  int idx = v.x + uGridN * (v.y + uGridN * v.z);
  int byteIdx = idx >> 3;
  ivec2 tc = ivec2(byteIdx % uOccWidth, byteIdx / uOccWidth);
  uint b = texelFetch(uOccupancy, tc, 0).r;
  return ((b >> uint(idx & 7)) & 1u) == 1u;
}

// brick atlas texel of a voxel; all volume fetches MUST come through here
ivec2 brickTexel(ivec3 v) {
  if (!occupied(v)) {
    gGuardTripped = true;
  }
  ivec3 blk = v / uBlock;
  ivec3 local = v - blk * uBlock;
  ivec3 o = blk % uRBar;
  uvec3 off = texelFetch(uOffsets, ivec2(o.x, o.z * uRBar + o.y), 0).rgb;
  ivec3 slot = (blk % uMBar + ivec3(off) % uRBar) % uMBar;
  ivec3 t = slot * uBlock + local;
  return ivec2(t.x, t.z * (uMBar * uBlock) + t.y);
}

void main() {
  // pixel-center ray identical to the CPU ray generator
  vec2 frag = gl_FragCoord.xy;
  float ndcX = frag.x * 2.0 / uResolution.x - 1.0;
  float ndcY = frag.y * 2.0 / uResolution.y - 1.0;
  vec3 dir = normalize(ndcX * uTanH * uRight + ndcY * uTanV * uUp + uFwd);

  ivec2 px = ivec2(frag);
  vec4 meshPix = texelFetch(uMeshColor, px, 0);
  bool covered = (uShowMesh == 1) && meshPix.a > 0.5;
  vec3 cMesh = meshPix.rgb;
  float tMesh = texelFetch(uMeshDepth, px, 0).r;

  float tFront = texelFetch(uTFront, px, 0).r;
  float tBack = texelFetch(uTBack, px, 0).r;
  // inside the domain the entry distance is zero and only exit faces exist
  bool inside = all(greaterThanEqual(uEye, uBoundsMin)) && all(lessThanEqual(uEye, uBoundsMax));
  float tStart = inside ? 0.0 : tFront;
  float tEnd = tBack;
  if (covered) tEnd = min(tEnd, tMesh);

  vec3 cVol = vec3(0.0);
  float mVol = 0.0;
  if (uHasVolume == 1 && uShowVolume == 1 && tEnd > tStart) {
    float len = tEnd - tStart;
    float stepSize = uVoxelEdge * uStepScale;
    int steps = max(int(ceil(len / stepSize)), 1);
    float delta = len / float(steps);
    float trans = 1.0;
    for (int k = 0; k < steps; k++) {
      vec3 pos = uEye + dir * (tStart + (float(k) + 0.5) * delta);
      ivec3 v = clamp(ivec3(floor((pos - uBoundsMin) / uVoxelEdge)),
                      ivec3(0), ivec3(uGridN - 1));
      if (occupied(v)) {
        ivec2 tc = brickTexel(v);
        vec3 dm = uVolDMLo + texelFetch(uVolDensityMetal, tc, 0).rgb * (uVolDMHi - uVolDMLo);
        float sigma = dm.r;
        float alpha = 1.0 - exp(-sigma * delta);
        float omega = trans * alpha;
        if (omega > 0.0) {
          vec3 enc = uVolNormalLo + texelFetch(uVolNormal, tc, 0).rgb * (uVolNormalHi - uVolNormalLo);
          vec3 n = enc * 2.0 - 1.0;
          float nl = length(n);
          n = (nl > 1e-12) ? n / nl : vec3(0.0, 0.0, 1.0);
          vec3 diffuse = uVolDiffuseLo + texelFetch(uVolDiffuse, tc, 0).rgb * (uVolDiffuseHi - uVolDiffuseLo);
          vec3 tint = uVolTintLo + texelFetch(uVolTint, tc, 0).rgb * (uVolTintHi - uVolTintLo);
          vec4 weights = uVolWeightsLo + texelFetch(uVolWeights, tc, 0) * (uVolWeightsHi - uVolWeightsLo);
          cVol += omega * shadeSample(n, -dir, diffuse, tint, weights, dm.g);
          mVol += omega;
        }
        trans *= 1.0 - alpha;
        if (trans <= uEarlyStop) break;
      }
    }
  }

  vec3 behind = covered ? cMesh : uBackground.rgb;
  vec3 rgb = cVol + (1.0 - mVol) * behind;
  float alpha = covered ? 1.0 : (mVol + (1.0 - mVol) * uBackground.a);
  if (uGuardDebug == 1 && gGuardTripped) {
    outColor = vec4(1.0, 0.0, 1.0, 1.0);
    return;
  }
  outColor = vec4(rgb, alpha);
}
`;

export const LINES_VERT = `#version 300 es
in vec3 aPos;
in vec3 aOffset;
uniform mat4 uViewProj;
uniform float uScale;
uniform vec3 uBase;
void main() {
  gl_Position = uViewProj * vec4(uBase + aOffset + aPos * uScale, 1.0);
}
`;

export const LINES_FRAG = `#version 300 es
precision highp float;
uniform vec4 uColor;
out vec4 outColor;
void main() {
  outColor = uColor;
}
`;
