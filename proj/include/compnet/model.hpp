#pragma once

#include <array>
#include <map>
#include <memory>
#include <sstream>

#include "compnet/csfl.hpp"
#include "compnet/gru.hpp"
#include "compnet/io.hpp"

namespace compnet {

/// Architecture switches. The ablation letters map to: (a) full model,
/// (b) fusion=real-concat, (c) temporal=static, (d) temporal=frame-concat,
/// (e) freq_branch=off, (f) cln=separate, (g) cln=concat-real.
struct ModelConfig {
  int64_t channels = 16;
  int64_t event_bins = 5;
  int64_t levels = 3;
  int64_t blocks = 2;
  std::string fusion = "complex";
  std::string temporal = "gru";
  std::string freq_branch = "on";
  std::string cln = "whiten";
  uint64_t seed = 1;

  void validate() const {
    if (fusion != "complex" && fusion != "real-concat")
      throw ConfigError("model.fusion: unknown value '" + fusion + "'");
    if (temporal != "gru" && temporal != "static" && temporal != "frame-concat")
      throw ConfigError("model.temporal: unknown value '" + temporal + "'");
    if (freq_branch != "on" && freq_branch != "off")
      throw ConfigError("model.freq_branch: unknown value '" + freq_branch + "'");
    parse_cln_mode(cln);
    if (channels < 1 || event_bins < 1 || blocks < 1)
      throw ConfigError("model: channels/event_bins/blocks must be positive");
    if (levels < 2 || levels > 4)
      throw ConfigError("model.levels: supported range is 2-4");
  }

  static ModelConfig variant(char letter, ModelConfig base) {
    switch (letter) {
      case 'a': break;
      case 'b': base.fusion = "real-concat"; break;
      case 'c': base.temporal = "static"; break;
      case 'd': base.temporal = "frame-concat"; break;
      case 'e': base.freq_branch = "off"; break;
      case 'f': base.cln = "separate"; break;
      case 'g': base.cln = "concat-real"; break;
      default:
        throw ConfigError(std::string("unknown model variant '") + letter + "'");
    }
    return base;
  }

  std::string to_kv() const {
    std::ostringstream os;
    os << "model.channels = " << channels << "\n"
       << "model.event_bins = " << event_bins << "\n"
       << "model.levels = " << levels << "\n"
       << "model.blocks = " << blocks << "\n"
       << "model.fusion = " << fusion << "\n"
       << "model.temporal = " << temporal << "\n"
       << "model.freq_branch = " << freq_branch << "\n"
       << "model.cln = " << cln << "\n"
       << "model.seed = " << seed << "\n";
    return os.str();
  }

  static ModelConfig from_kv(const std::string& text) {
    ModelConfig cfg;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
      auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      auto trim = [](std::string s) {
        size_t a = s.find_first_not_of(" \t");
        size_t b = s.find_last_not_of(" \t\r");
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
      };
      std::string key = trim(line.substr(0, eq)), val = trim(line.substr(eq + 1));
      if (key == "model.channels") cfg.channels = std::stoll(val);
      else if (key == "model.event_bins") cfg.event_bins = std::stoll(val);
      else if (key == "model.levels") cfg.levels = std::stoll(val);
      else if (key == "model.blocks") cfg.blocks = std::stoll(val);
      else if (key == "model.fusion") cfg.fusion = val;
      else if (key == "model.temporal") cfg.temporal = val;
      else if (key == "model.freq_branch") cfg.freq_branch = val;
      else if (key == "model.cln") cfg.cln = val;
      else if (key == "model.seed") cfg.seed = std::stoull(val);
    }
    cfg.validate();
    return cfg;
  }
};

/// Three consecutive degraded frames with their event grids. Frames are
/// (N, 3, H, W) real tensors in [0,1]; event grids (N, C_E, H, W).
template <typename T>
struct FrameWindow {
  std::array<CTensor<T>, 3> frames;
  std::array<CTensor<T>, 3> events;

  void validate(int64_t event_bins) const {
    Shape4 s = frames[0].s4();
    check_shape(s.c == 3, "frame window: frames must have 3 channels");
    for (const auto& f : frames) {
      Shape4 fs = f.s4();
      check_shape(fs == s, "frame window: frame shape mismatch");
    }
    for (const auto& e : events) {
      Shape4 es = e.s4();
      check_shape(es.n == s.n && es.h == s.h && es.w == s.w,
                  "frame window: event grid extent mismatch");
      check_shape(es.c == event_bins, "frame window: event grid has " +
                                          std::to_string(es.c) + " bins, model expects " +
                                          std::to_string(event_bins));
    }
  }
};

/// Three real 3x3 convolutions with real GeLU between (the F_R / F_I
/// embedding networks).
template <typename T>
struct EmbedNet {
  RealConv2d<T> c0, c1, c2;

  EmbedNet() = default;
  EmbedNet(const std::string& name, int64_t in_c, int64_t out_c, uint64_t seed) {
    ConvGeom g{.stride = 1, .pad = 1};
    auto u = InitScheme::kUniformFanScaled;
    c0 = RealConv2d<T>::conv(name + ".c0", in_c, out_c, 3, g, true, u, seed);
    c1 = RealConv2d<T>::conv(name + ".c1", out_c, out_c, 3, g, true, u, seed);
    c2 = RealConv2d<T>::conv(name + ".c2", out_c, out_c, 3, g, true, u, seed);
  }

  Var forward(Tape<T>& t, Var x) {
    return c2.forward(t, real_gelu(t, c1.forward(t, real_gelu(t, c0.forward(t, x)))));
  }

  void params(std::vector<Parameter<T>*>& out) {
    c0.params(out);
    c1.params(out);
    c2.params(out);
  }

  int64_t param_count() const {
    return c0.param_count() + c1.param_count() + c2.param_count();
  }
};

/// Restoration model interface shared by the complex full model and the
/// real-valued ablation twin.
template <typename T>
class Model {
 public:
  virtual ~Model() = default;

  /// Unclamped restored frames (loss must see unclamped values); inputs of
  /// arbitrary extent are reflection-padded internally and cropped back.
  virtual std::array<Var, 3> forward(Tape<T>& t, const FrameWindow<T>& w) = 0;

  virtual int64_t param_count() const = 0;

  const std::vector<Parameter<T>*>& parameters() { return params_; }
  const ModelConfig& config() const { return cfg_; }

 protected:
  ModelConfig cfg_;
  std::vector<Parameter<T>*> params_;
};

namespace detail {

/// Bottom/right reflection pad to a multiple of 2^(levels-1); no-op Var
/// passthrough when already aligned.
template <typename T>
Var pad_to_grid(Tape<T>& t, Var v, int64_t levels) {
  Shape4 s = t.value(v).s4();
  int64_t div = int64_t{1} << (levels - 1);
  int64_t pb = (div - s.h % div) % div;
  int64_t pr = (div - s.w % div) % div;
  if (pb == 0 && pr == 0) return v;
  return reflect_pad2d(t, v, 0, pb, 0, pr);
}

}  // namespace detail

template <typename T>
class ComplexCompEvent : public Model<T> {
 public:
  EmbedNet<T> embed_frame, embed_event;
  CGMCell<T> gru_fwd, gru_bwd;
  UNetTrunk<T> unet;
  std::array<RealConv2d<T>, 3> proj;

  explicit ComplexCompEvent(const ModelConfig& cfg) {
    cfg.validate();
    this->cfg_ = cfg;
    const int64_t c = cfg.channels;
    const uint64_t seed = cfg.seed;
    const bool freq = cfg.freq_branch == "on";
    ClnMode cm = parse_cln_mode(cfg.cln);
    embed_frame = EmbedNet<T>("embed.frame", 3, c, seed);
    embed_event = EmbedNet<T>("embed.event", cfg.event_bins, c, seed);
    int64_t trunk_in = c;
    if (cfg.temporal == "gru") {
      gru_fwd = CGMCell<T>("gru.fwd", c, seed);
      gru_bwd = CGMCell<T>("gru.bwd", c, seed);
      trunk_in = 6 * c;
    } else if (cfg.temporal == "frame-concat") {
      trunk_in = 3 * c;
    }
    unet = UNetTrunk<T>("unet", trunk_in, c, cfg.levels, cfg.blocks, cm, freq, seed);
    for (int k = 0; k < 3; ++k)
      proj[k] = RealConv2d<T>::conv("proj" + std::to_string(k), 2 * c, 3, 1, {},
                                    true, InitScheme::kZeros, seed);
    collect();
  }

  std::array<Var, 3> forward(Tape<T>& t, const FrameWindow<T>& w) override {
    w.validate(this->cfg_.event_bins);
    Shape4 s = w.frames[0].s4();
    std::array<Var, 3> frames_in, z;
    for (int k = 0; k < 3; ++k) {
      frames_in[k] = t.input(w.frames[k]);
      Var ip = detail::pad_to_grid(t, frames_in[k], this->cfg_.levels);
      Var ep = detail::pad_to_grid(t, t.input(w.events[k]), this->cfg_.levels);
      z[k] = make_complex(t, embed_frame.forward(t, ip), embed_event.forward(t, ep));
    }
    std::array<Var, 3> feats;
    if (this->cfg_.temporal == "gru") {
      auto aligned = run_bidirectional(t, {z[0], z[1], z[2]}, gru_fwd, gru_bwd);
      feats = unet.forward(t, concat_channels(t, aligned));
    } else if (this->cfg_.temporal == "frame-concat") {
      feats = unet.forward(t, concat_channels(t, {z[0], z[1], z[2]}));
    } else {  // static: each frame restored independently
      for (int k = 0; k < 3; ++k)
        feats[k] = unet.heads[k].forward(t, unet.forward_trunk(t, z[k]));
    }
    std::array<Var, 3> out;
    for (int k = 0; k < 3; ++k) {
      Var r = proj[k].forward(t, stack_reim(t, feats[k]));
      r = crop2d(t, r, 0, 0, s.h, s.w);
      out[k] = add(t, frames_in[k], r);
    }
    return out;
  }

  int64_t param_count() const override {
    int64_t n = embed_frame.param_count() + embed_event.param_count();
    if (this->cfg_.temporal == "gru") {
      std::vector<Parameter<T>*> tmp;
      const_cast<CGMCell<T>&>(gru_fwd).params(tmp);
      const_cast<CGMCell<T>&>(gru_bwd).params(tmp);
      for (auto* p : tmp) n += 2 * p->value.numel();
    }
    n += unet.param_count();
    for (const auto& p : proj) n += p.param_count();
    return n;
  }

 private:
  void collect() {
    auto& ps = this->params_;
    embed_frame.params(ps);
    embed_event.params(ps);
    if (this->cfg_.temporal == "gru") {
      gru_fwd.params(ps);
      gru_bwd.params(ps);
    }
    unet.params(ps);
    for (auto& p : proj) p.params(ps);
  }
};

/// Variant (b): complex convolutions replaced by real ones of comparable
/// parameter count; RGB and event features travel as concatenated real
/// channels at width round(sqrt(2) * C).
template <typename T>
class RealCompEvent : public Model<T> {
 public:
  EmbedNet<T> embed_frame, embed_event;
  RealConv2d<T> combine;
  RealGruCell<T> gru_fwd, gru_bwd;
  RealUNetTrunk<T> unet;
  std::array<RealConv2d<T>, 3> proj;

  explicit RealCompEvent(const ModelConfig& cfg) {
    cfg.validate();
    this->cfg_ = cfg;
    const int64_t c = cfg.channels;
    const int64_t m = real_width(c);
    const uint64_t seed = cfg.seed;
    const bool freq = cfg.freq_branch == "on";
    embed_frame = EmbedNet<T>("embed.frame", 3, c, seed);
    embed_event = EmbedNet<T>("embed.event", cfg.event_bins, c, seed);
    combine = RealConv2d<T>::conv("combine", 2 * c, m, 1, {}, true,
                                  InitScheme::kUniformFanScaled, seed);
    int64_t trunk_in = m;
    if (cfg.temporal == "gru") {
      gru_fwd = RealGruCell<T>("gru.fwd", m, m, seed);
      gru_bwd = RealGruCell<T>("gru.bwd", m, m, seed);
      trunk_in = 6 * m;
    } else if (cfg.temporal == "frame-concat") {
      trunk_in = 3 * m;
    }
    unet = RealUNetTrunk<T>("unet", trunk_in, c, cfg.levels, cfg.blocks, freq, seed);
    for (int k = 0; k < 3; ++k)
      proj[k] = RealConv2d<T>::conv("proj" + std::to_string(k), m, 3, 1, {}, true,
                                    InitScheme::kZeros, seed);
    collect();
  }

  std::array<Var, 3> forward(Tape<T>& t, const FrameWindow<T>& w) override {
    w.validate(this->cfg_.event_bins);
    Shape4 s = w.frames[0].s4();
    std::array<Var, 3> frames_in, z;
    for (int k = 0; k < 3; ++k) {
      frames_in[k] = t.input(w.frames[k]);
      Var ip = detail::pad_to_grid(t, frames_in[k], this->cfg_.levels);
      Var ep = detail::pad_to_grid(t, t.input(w.events[k]), this->cfg_.levels);
      Var cat = concat_channels(
          t, {embed_frame.forward(t, ip), embed_event.forward(t, ep)});
      z[k] = combine.forward(t, cat);
    }
    std::array<Var, 3> feats;
    if (this->cfg_.temporal == "gru") {
      auto aligned = run_bidirectional_real(t, {z[0], z[1], z[2]}, gru_fwd, gru_bwd);
      Var trunk = unet.forward_trunk(t, concat_channels(t, aligned));
      for (int k = 0; k < 3; ++k) feats[k] = unet.heads[k].forward(t, trunk);
    } else if (this->cfg_.temporal == "frame-concat") {
      Var trunk = unet.forward_trunk(t, concat_channels(t, {z[0], z[1], z[2]}));
      for (int k = 0; k < 3; ++k) feats[k] = unet.heads[k].forward(t, trunk);
    } else {
      for (int k = 0; k < 3; ++k)
        feats[k] = unet.heads[k].forward(t, unet.forward_trunk(t, z[k]));
    }
    std::array<Var, 3> out;
    for (int k = 0; k < 3; ++k) {
      Var r = proj[k].forward(t, feats[k]);
      r = crop2d(t, r, 0, 0, s.h, s.w);
      out[k] = add(t, frames_in[k], r);
    }
    return out;
  }

  int64_t param_count() const override {
    int64_t n = embed_frame.param_count() + embed_event.param_count() +
                combine.param_count();
    if (this->cfg_.temporal == "gru") {
      std::vector<Parameter<T>*> tmp;
      const_cast<RealGruCell<T>&>(gru_fwd).params(tmp);
      const_cast<RealGruCell<T>&>(gru_bwd).params(tmp);
      for (auto* p : tmp) n += p->value.numel();
    }
    n += unet.param_count();
    for (const auto& p : proj) n += p.param_count();
    return n;
  }

 private:
  void collect() {
    auto& ps = this->params_;
    embed_frame.params(ps);
    embed_event.params(ps);
    combine.params(ps);
    if (this->cfg_.temporal == "gru") {
      gru_fwd.params(ps);
      gru_bwd.params(ps);
    }
    unet.params(ps);
    for (auto& p : proj) p.params(ps);
  }
};

template <typename T>
std::unique_ptr<Model<T>> build_model(const ModelConfig& cfg) {
  cfg.validate();
  if (cfg.fusion == "real-concat")
    return std::make_unique<RealCompEvent<T>>(cfg);
  return std::make_unique<ComplexCompEvent<T>>(cfg);
}

/// Mean Charbonnier penalty over the three restored frames.
template <typename T>
Var window_loss(Tape<T>& t, const std::array<Var, 3>& restored,
                const std::array<CTensor<T>, 3>& targets, double eps = 1e-3) {
  std::vector<Var> per;
  for (int k = 0; k < 3; ++k)
    per.push_back(charbonnier_mean(t, restored[k], targets[k], eps));
  return mean_scalars(t, per);
}

template <typename T>
void clamp01(CTensor<T>& x) {
  for (auto& v : x.re) v = std::min(T(1), std::max(T(0), v));
}

// ---------------------------------------------------------------------------
// Checkpointing: CKPT records for every parameter, preceded by a header
// carrying the serialized ModelConfig (self-describing checkpoints), plus
// optional optimizer-moment records for exact training resume.
// ---------------------------------------------------------------------------

template <typename T>
Checkpoint make_checkpoint(Model<T>& m, const std::string& extra_header = "") {
  Checkpoint ck;
  ck.header = m.config().to_kv() + extra_header;
  for (auto* p : m.parameters())
    ck.tensors.emplace_back(p->name, p->value.template cast<float>());
  return ck;
}

template <typename T>
void load_parameters(Model<T>& m, const Checkpoint& ck) {
  for (auto* p : m.parameters()) {
    const CTensor<float>* t = ck.find(p->name);
    if (!t) throw DataError("checkpoint is missing parameter " + p->name);
    check_shape(t->shape == p->value.shape,
                "checkpoint parameter " + p->name + " has shape " +
                    t->shape_str() + ", model expects " + p->value.shape_str());
    p->value = t->template cast<T>();
  }
}

}  // namespace compnet
