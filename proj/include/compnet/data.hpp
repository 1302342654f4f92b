#pragma once

#include <algorithm>
#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "compnet/io.hpp"
#include "compnet/model.hpp"
#include "compnet/rng.hpp"
#include "compnet/tensor.hpp"

namespace compnet {

// ---------------------------------------------------------------------------
// Event streams
// ---------------------------------------------------------------------------

struct Event {
  uint16_t x, y;
  double ts;
  int8_t polarity;  // +1 / -1
};

/// Asynchronous brightness-change records over a time window, sorted by
/// timestamp.
struct EventStream {
  std::vector<Event> events;
  double t_start = 0, t_end = 0;
  int64_t height = 0, width = 0;
};

inline constexpr char kEvtMagic[5] = {'E', 'V', 'T', '1', '\0'};

inline void write_evt1(const std::string& path, const EventStream& es) {
  std::vector<uint8_t> buf;
  buf.insert(buf.end(), kEvtMagic, kEvtMagic + 5);
  bytes::put_u32(buf, static_cast<uint32_t>(es.height));
  bytes::put_u32(buf, static_cast<uint32_t>(es.width));
  bytes::put_f64(buf, es.t_start);
  bytes::put_f64(buf, es.t_end);
  bytes::put_u64(buf, es.events.size());
  for (const Event& e : es.events) {
    bytes::put_u16(buf, e.x);
    bytes::put_u16(buf, e.y);
    bytes::put_f64(buf, e.ts);
    buf.push_back(static_cast<uint8_t>(e.polarity));
  }
  write_file(path, buf);
}

inline EventStream read_evt1(const std::string& path) {
  auto data = read_file(path);
  bytes::Reader r(data, path);
  r.expect_magic(kEvtMagic, 5);
  EventStream es;
  es.height = r.u32("height");
  es.width = r.u32("width");
  es.t_start = r.f64("t_start");
  es.t_end = r.f64("t_end");
  uint64_t count = r.u64("event count");
  es.events.reserve(count);
  for (uint64_t i = 0; i < count; ++i) {
    Event e;
    e.x = r.u16("event x");
    e.y = r.u16("event y");
    e.ts = r.f64("event ts");
    e.polarity = static_cast<int8_t>(r.u8("event polarity"));
    es.events.push_back(e);
  }
  return es;
}

// ---------------------------------------------------------------------------
// Procedural scenes
// ---------------------------------------------------------------------------

/// Procedural clean-video generator settings. Velocities are in pixels per
/// latent frame; latent_rate latent frames average into one output frame
/// and must be odd so a center latent exists.
struct SceneSpec {
  uint64_t seed = 7;
  int64_t height = 64, width = 64;
  int64_t objects = 4;
  int64_t latent_rate = 13;
  double background = 0.35;
  double max_speed = 2.0;

  void validate() const {
    if (height < 2 || width < 2) throw ConfigError("scene: degenerate canvas");
    if (latent_rate < 1 || latent_rate % 2 == 0)
      throw ConfigError("scene: latent_rate must be odd and positive");
    if (objects < 0) throw ConfigError("scene: negative object count");
  }
};

/// Degradation: temporal mean of 2m+1 centered latents, v -> b * v^gamma
/// darkening, additive Gaussian noise, clip to [0,1].
struct DegradeSpec {
  int64_t blur_span = 6;  // m
  double brightness = 0.15;
  double gamma = 2.2;
  double noise_sigma = 0.01;
  uint64_t seed = 1;

  void validate(int64_t latent_rate) const {
    if (brightness <= 0.0 || brightness > 1.0)
      throw ConfigError("degrade: brightness must be in (0,1]");
    if (2 * blur_span + 1 > latent_rate)
      throw ConfigError("degrade: blur span 2m+1 exceeds latents per frame");
    if (noise_sigma < 0) throw ConfigError("degrade: negative noise sigma");
  }
};

namespace detail {

struct SceneObject {
  int shape;    // 0 rect, 1 disk
  int texture;  // 0 checker, 1 gradient, 2 noise
  double cx, cy, vx, vy, half_w, half_h;
  double rgb[3];
  uint64_t noise_key;
};

inline std::vector<SceneObject> make_objects(const SceneSpec& spec) {
  Rng rng(spec.seed);
  std::vector<SceneObject> objs;
  for (int64_t i = 0; i < spec.objects; ++i) {
    SceneObject o;
    o.shape = static_cast<int>(rng.uniform_int(2));
    o.texture = static_cast<int>(rng.uniform_int(3));
    o.cx = rng.uniform(0.15, 0.85) * spec.width;
    o.cy = rng.uniform(0.15, 0.85) * spec.height;
    o.vx = rng.uniform(-spec.max_speed, spec.max_speed);
    o.vy = rng.uniform(-spec.max_speed, spec.max_speed);
    o.half_w = rng.uniform(0.08, 0.22) * spec.width;
    o.half_h = rng.uniform(0.08, 0.22) * spec.height;
    for (double& c : o.rgb) c = rng.uniform(0.35, 1.0);
    o.noise_key = rng.next_u64();
    objs.push_back(o);
  }
  return objs;
}

inline double object_texture(const SceneObject& o, double dx, double dy) {
  switch (o.texture) {
    case 0: {  // checker, 4 px cells
      int64_t qx = static_cast<int64_t>(std::floor(dx / 4.0));
      int64_t qy = static_cast<int64_t>(std::floor(dy / 4.0));
      return ((qx + qy) & 1) ? 1.0 : 0.35;
    }
    case 1:  // horizontal gradient across the object
      return 0.3 + 0.7 * std::clamp((dx + o.half_w) / (2.0 * o.half_w), 0.0, 1.0);
    default: {  // value noise on the object-local integer grid
      uint64_t h = mix64(o.noise_key ^
                         mix64((static_cast<uint64_t>(static_cast<int64_t>(std::floor(dx)) + 4096) << 20) ^
                               static_cast<uint64_t>(static_cast<int64_t>(std::floor(dy)) + 4096)));
      return 0.3 + 0.7 * (static_cast<double>(h >> 11) * 0x1.0p-53);
    }
  }
}

}  // namespace detail

/// Renders one latent frame (3, H, W) at latent index k; deterministic for
/// a fixed spec.
inline CTensor<float> render_latent(const SceneSpec& spec,
                                    const std::vector<detail::SceneObject>& objs,
                                    int64_t k) {
  CTensor<float> img({3, spec.height, spec.width});
  std::fill(img.re.begin(), img.re.end(), static_cast<float>(spec.background));
  for (const auto& o : objs) {
    double cx = o.cx + o.vx * static_cast<double>(k);
    double cy = o.cy + o.vy * static_cast<double>(k);
    int64_t x0 = std::max<int64_t>(0, static_cast<int64_t>(std::floor(cx - o.half_w - 1)));
    int64_t x1 = std::min<int64_t>(spec.width, static_cast<int64_t>(std::ceil(cx + o.half_w + 2)));
    int64_t y0 = std::max<int64_t>(0, static_cast<int64_t>(std::floor(cy - o.half_h - 1)));
    int64_t y1 = std::min<int64_t>(spec.height, static_cast<int64_t>(std::ceil(cy + o.half_h + 2)));
    for (int64_t y = y0; y < y1; ++y)
      for (int64_t x = x0; x < x1; ++x) {
        double dx = (static_cast<double>(x) + 0.5) - cx;
        double dy = (static_cast<double>(y) + 0.5) - cy;
        bool inside = o.shape == 0
                          ? (std::abs(dx) <= o.half_w && std::abs(dy) <= o.half_h)
                          : (dx * dx / (o.half_w * o.half_w) +
                                 dy * dy / (o.half_h * o.half_h) <=
                             1.0);
        if (!inside) continue;
        double tex = detail::object_texture(o, dx, dy);
        for (int c = 0; c < 3; ++c)
          img.re[(c * spec.height + y) * spec.width + x] =
              static_cast<float>(std::clamp(o.rgb[c] * tex, 0.0, 1.0));
      }
  }
  return img;
}

/// All latent frames for n output frames (n * latent_rate frames).
inline std::vector<CTensor<float>> synth_scene(const SceneSpec& spec,
                                               int64_t n_output_frames) {
  spec.validate();
  auto objs = detail::make_objects(spec);
  std::vector<CTensor<float>> latents;
  latents.reserve(static_cast<size_t>(n_output_frames * spec.latent_rate));
  for (int64_t k = 0; k < n_output_frames * spec.latent_rate; ++k)
    latents.push_back(render_latent(spec, objs, k));
  return latents;
}

/// Center latent index of output frame f.
inline int64_t center_latent(const SceneSpec& spec, int64_t frame) {
  return frame * spec.latent_rate + spec.latent_rate / 2;
}

/// Clean target of output frame f (its center latent).
inline CTensor<float> clean_target(const std::vector<CTensor<float>>& latents,
                                   const SceneSpec& spec, int64_t frame) {
  return latents[center_latent(spec, frame)];
}

/// Low-light blurry observation of output frame f.
inline CTensor<float> degrade(const std::vector<CTensor<float>>& latents,
                              const SceneSpec& scene, const DegradeSpec& spec,
                              int64_t frame) {
  spec.validate(scene.latent_rate);
  int64_t c = center_latent(scene, frame);
  int64_t m = spec.blur_span;
  check_shape(c - m >= 0 && c + m < static_cast<int64_t>(latents.size()),
              "degrade: insufficient latents for blur span");
  const auto& shape = latents[0].shape;
  CTensor<float> out(shape);
  int64_t n = out.numel();
  std::vector<double> acc(n, 0.0);
  for (int64_t j = c - m; j <= c + m; ++j)
    for (int64_t i = 0; i < n; ++i) acc[i] += latents[j].re[i];
  const double inv = 1.0 / static_cast<double>(2 * m + 1);
  Rng rng(mix64(spec.seed ^ mix64(static_cast<uint64_t>(frame))));
  for (int64_t i = 0; i < n; ++i) {
    double v = acc[i] * inv;
    v = spec.brightness * std::pow(v, spec.gamma);
    if (spec.noise_sigma > 0) v += spec.noise_sigma * rng.normal();
    out.re[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Event simulation (threshold-crossing model on clean latents)
// ---------------------------------------------------------------------------

inline double luminance_at(const CTensor<float>& rgb, int64_t y, int64_t x) {
  int64_t h = rgb.shape[1], w = rgb.shape[2];
  return 0.299 * rgb.re[(0 * h + y) * w + x] + 0.587 * rgb.re[(1 * h + y) * w + x] +
         0.114 * rgb.re[(2 * h + y) * w + x];
}

/// Per pixel, tracks L = log(luminance + eps_log) across latents
/// [j0, j1]; each inter-latent interval emits floor(|acc|/theta) events of
/// sign(acc) with timestamps linearly interpolated across the interval, and
/// the sub-threshold residual carries forward. Latent j lives at time
/// j * dt with dt = 1 / latent_rate.
inline EventStream simulate_events(const std::vector<CTensor<float>>& latents,
                                   const SceneSpec& scene, int64_t j0, int64_t j1,
                                   double theta, double eps_log = 1e-3) {
  if (theta <= 0) throw ConfigError("simulate_events: theta must be positive");
  check_shape(j0 >= 0 && j1 > j0 && j1 < static_cast<int64_t>(latents.size()),
              "simulate_events: bad latent range");
  const double dt = 1.0 / static_cast<double>(scene.latent_rate);
  EventStream es;
  es.height = scene.height;
  es.width = scene.width;
  es.t_start = static_cast<double>(j0) * dt;
  es.t_end = static_cast<double>(j1) * dt;
  const int64_t npix = scene.height * scene.width;
  std::vector<double> prev_log(npix), residual(npix, 0.0);
  for (int64_t y = 0; y < scene.height; ++y)
    for (int64_t x = 0; x < scene.width; ++x)
      prev_log[y * scene.width + x] = std::log(luminance_at(latents[j0], y, x) + eps_log);
  std::vector<Event> interval_events;
  for (int64_t j = j0 + 1; j <= j1; ++j) {
    interval_events.clear();
    const double t0 = static_cast<double>(j - 1) * dt;
    for (int64_t y = 0; y < scene.height; ++y)
      for (int64_t x = 0; x < scene.width; ++x) {
        int64_t p = y * scene.width + x;
        double cur = std::log(luminance_at(latents[j], y, x) + eps_log);
        residual[p] += cur - prev_log[p];
        prev_log[p] = cur;
        int64_t count = static_cast<int64_t>(std::floor(std::abs(residual[p]) / theta));
        if (count == 0) continue;
        int8_t sign = residual[p] > 0 ? int8_t{1} : int8_t{-1};
        for (int64_t e = 0; e < count; ++e) {
          double ts = t0 + dt * (static_cast<double>(e + 1) /
                                 static_cast<double>(count + 1));
          interval_events.push_back({static_cast<uint16_t>(x),
                                     static_cast<uint16_t>(y), ts, sign});
        }
        residual[p] -= static_cast<double>(count) * theta * sign;
      }
    std::stable_sort(interval_events.begin(), interval_events.end(),
                     [](const Event& a, const Event& b) {
                       if (a.ts != b.ts) return a.ts < b.ts;
                       if (a.y != b.y) return a.y < b.y;
                       return a.x < b.x;
                     });
    es.events.insert(es.events.end(), interval_events.begin(), interval_events.end());
  }
  return es;
}

/// Dense (C_E, H, W) voxel grid: normalized time u in [0,1), bin coordinate
/// p = u * (C_E - 1), polarity mass split bilinearly between floor(p) and
/// ceil(p).
inline CTensor<float> voxelize(const EventStream& es, int64_t bins) {
  if (bins < 1) throw ConfigError("voxelize: need at least one bin");
  if (es.t_end <= es.t_start) throw DataError("voxelize: empty time window");
  CTensor<float> grid({bins, es.height, es.width});
  const double span = es.t_end - es.t_start;
  for (const Event& e : es.events) {
    double u = (e.ts - es.t_start) / span;
    double p = u * static_cast<double>(bins - 1);
    int64_t lo = static_cast<int64_t>(std::floor(p));
    lo = std::clamp<int64_t>(lo, 0, bins - 1);
    int64_t hi = std::min<int64_t>(lo + 1, bins - 1);
    double frac = p - static_cast<double>(lo);
    int64_t at = e.y * es.width + e.x;
    grid.re[lo * es.height * es.width + at] +=
        static_cast<float>((1.0 - frac) * e.polarity);
    if (hi != lo)
      grid.re[hi * es.height * es.width + at] += static_cast<float>(frac * e.polarity);
  }
  return grid;
}

// ---------------------------------------------------------------------------
// Dataset assembly and serialization
// ---------------------------------------------------------------------------

/// One three-frame sample: degraded observations, clean targets, and the
/// two inter-frame event windows.
struct SampleRecord {
  std::array<CTensor<float>, 3> degraded, clean;
  std::array<EventStream, 2> windows;
};

struct DataGenConfig {
  SceneSpec scene;
  DegradeSpec degrade;
  double theta = 0.15;
  double eps_log = 1e-3;
  int64_t train_samples = 8;
  int64_t eval_samples = 2;
  std::string format = "cten";  // cten | ppm
  uint64_t seed = 7;
};

/// Generates sample `index` deterministically (each sample owns an
/// independent RNG stream derived from the master seed).
inline SampleRecord generate_sample(const DataGenConfig& cfg, int64_t index) {
  SceneSpec scene = cfg.scene;
  scene.seed = mix64(cfg.seed ^ mix64(static_cast<uint64_t>(index) * 0x9e37u));
  DegradeSpec deg = cfg.degrade;
  deg.seed = mix64(scene.seed ^ 0x5bd1e995u);
  auto latents = synth_scene(scene, 3);
  SampleRecord rec;
  for (int k = 0; k < 3; ++k) {
    rec.clean[k] = clean_target(latents, scene, k);
    rec.degraded[k] = degrade(latents, scene, deg, k);
  }
  for (int w = 0; w < 2; ++w)
    rec.windows[w] = simulate_events(latents, scene, center_latent(scene, w),
                                     center_latent(scene, w + 1), cfg.theta,
                                     cfg.eps_log);
  return rec;
}

/// Event grids for the three frames: each frame uses the window starting at
/// it (its leading window); the last frame has none and falls back to its
/// trailing window. So E0 = vox(W0), E1 = vox(W1), E2 = vox(W1).
template <typename T>
FrameWindow<T> to_frame_window(const std::vector<const SampleRecord*>& batch,
                               int64_t bins) {
  check_shape(!batch.empty(), "to_frame_window: empty batch");
  int64_t n = static_cast<int64_t>(batch.size());
  int64_t h = batch[0]->degraded[0].shape[1], w = batch[0]->degraded[0].shape[2];
  FrameWindow<T> win;
  for (int k = 0; k < 3; ++k) {
    win.frames[k] = CTensor<T>(n, 3, h, w);
    win.events[k] = CTensor<T>(n, bins, h, w);
  }
  for (int64_t i = 0; i < n; ++i) {
    const SampleRecord& r = *batch[i];
    for (int k = 0; k < 3; ++k) {
      check_shape(r.degraded[k].shape[1] == h && r.degraded[k].shape[2] == w,
                  "to_frame_window: mixed resolutions in batch");
      for (int64_t j = 0; j < 3 * h * w; ++j)
        win.frames[k].re[i * 3 * h * w + j] = static_cast<T>(r.degraded[k].re[j]);
      const EventStream& es = k == 0 ? r.windows[0] : r.windows[1];
      auto grid = voxelize(es, bins);
      for (int64_t j = 0; j < bins * h * w; ++j)
        win.events[k].re[i * bins * h * w + j] = static_cast<T>(grid.re[j]);
    }
  }
  return win;
}

inline std::string sample_dir_name(int64_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "sample_%04lld", static_cast<long long>(index));
  return buf;
}

/// Writes manifest + per-sample files. Returns the manifest text.
inline std::string write_dataset(const std::string& dir, const DataGenConfig& cfg) {
  namespace fs = std::filesystem;
  cfg.scene.validate();
  cfg.degrade.validate(cfg.scene.latent_rate);
  if (cfg.format != "cten" && cfg.format != "ppm")
    throw ConfigError("data.format: unknown value '" + cfg.format + "'");
  fs::create_directories(dir);
  const int64_t total = cfg.train_samples + cfg.eval_samples;
  std::string manifest;
  std::vector<SampleRecord> recs(total);
  parallel_for(total, [&](int64_t i) { recs[i] = generate_sample(cfg, i); });
  for (int64_t i = 0; i < total; ++i) {
    std::string sdir = sample_dir_name(i);
    fs::create_directories(fs::path(dir) / sdir);
    const SampleRecord& rec = recs[i];
    for (int k = 0; k < 3; ++k) {
      auto base = fs::path(dir) / sdir;
      if (cfg.format == "cten") {
        write_cten((base / ("frame_" + std::to_string(k) + ".cten")).string(),
                   rec.degraded[k]);
        write_cten((base / ("clean_" + std::to_string(k) + ".cten")).string(),
                   rec.clean[k]);
      } else {
        write_ppm((base / ("frame_" + std::to_string(k) + ".ppm")).string(),
                  rec.degraded[k]);
        write_ppm((base / ("clean_" + std::to_string(k) + ".ppm")).string(),
                  rec.clean[k]);
      }
    }
    for (int w = 0; w < 2; ++w)
      write_evt1((fs::path(dir) / sdir / ("events_" + std::to_string(w) + ".evt1")).string(),
                 rec.windows[w]);
    manifest += "sample=" + std::to_string(i) +
                " role=" + (i < cfg.train_samples ? "train" : "eval") +
                " dir=" + sdir + " format=" + cfg.format + "\n";
  }
  std::ofstream mf(fs::path(dir) / "manifest.txt", std::ios::trunc);
  mf << manifest;
  if (!mf) throw DataError("cannot write manifest in " + dir);
  return manifest;
}

/// Loads samples whose role matches (empty filter = all).
inline std::vector<SampleRecord> read_dataset(const std::string& dir,
                                              const std::string& role_filter = "") {
  namespace fs = std::filesystem;
  std::ifstream mf(fs::path(dir) / "manifest.txt");
  if (!mf) throw DataError("no manifest.txt in " + dir);
  std::vector<SampleRecord> out;
  std::string line;
  while (std::getline(mf, line)) {
    if (line.empty()) continue;
    std::string role, sdir, format = "cten";
    for (size_t pos = 0; pos < line.size();) {
      size_t sp = line.find(' ', pos);
      std::string tok = line.substr(pos, sp == std::string::npos ? sp : sp - pos);
      if (tok.rfind("role=", 0) == 0) role = tok.substr(5);
      if (tok.rfind("dir=", 0) == 0) sdir = tok.substr(4);
      if (tok.rfind("format=", 0) == 0) format = tok.substr(7);
      if (sp == std::string::npos) break;
      pos = sp + 1;
    }
    if (sdir.empty()) throw DataError(dir + "/manifest.txt: malformed line: " + line);
    if (!role_filter.empty() && role != role_filter) continue;
    SampleRecord rec;
    auto base = fs::path(dir) / sdir;
    for (int k = 0; k < 3; ++k) {
      if (format == "cten") {
        rec.degraded[k] = read_cten((base / ("frame_" + std::to_string(k) + ".cten")).string());
        rec.clean[k] = read_cten((base / ("clean_" + std::to_string(k) + ".cten")).string());
      } else {
        rec.degraded[k] = read_ppm((base / ("frame_" + std::to_string(k) + ".ppm")).string());
        rec.clean[k] = read_ppm((base / ("clean_" + std::to_string(k) + ".ppm")).string());
      }
    }
    for (int w = 0; w < 2; ++w)
      rec.windows[w] =
          read_evt1((base / ("events_" + std::to_string(w) + ".evt1")).string());
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace compnet
