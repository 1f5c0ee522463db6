#pragma once

#include <cstdint>
#include <cstring>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "shield/audio/waveform.hpp"
#include "shield/common.hpp"
#include "shield/nn/ops.hpp"
#include "shield/nn/params.hpp"
#include "shield/rng.hpp"

namespace shield::afgan {

// G1: U-Net, G2: SEGAN-style encoder/decoder with bottleneck noise,
// G3: dilated residual stack (operational-GAN style).
enum class GenId { G1, G2, G3 };

inline const std::vector<GenId>& all_gen_ids() {
  static const std::vector<GenId> ids = {GenId::G1, GenId::G2, GenId::G3};
  return ids;
}
inline std::string to_string(GenId id) {
  switch (id) {
    case GenId::G1: return "G1";
    case GenId::G2: return "G2";
    case GenId::G3: return "G3";
  }
  return "?";
}
inline std::optional<GenId> parse_gen_id(const std::string& s) {
  if (s == "G1") return GenId::G1;
  if (s == "G2") return GenId::G2;
  if (s == "G3") return GenId::G3;
  return std::nullopt;
}

struct GeneratorConfig {
  GenId id = GenId::G1;
  std::size_t length = audio::kDefaultClipLength;
  std::vector<int> widths = {2, 4, 4, 8};  // encoder widths (G1, G2); each level halves the length
  int kernel = 5;
  int noise_channels = 2;  // G2 bottleneck noise
  int res_channels = 4;    // G3
  int res_blocks = 6;      // G3, dilation doubles per block
  int res_kernel = 3;

  bool operator==(const GeneratorConfig&) const = default;
};

struct DiscriminatorConfig {
  std::size_t length = audio::kDefaultClipLength;
  std::vector<int> widths = {8, 16, 16};
  std::vector<int> kernels = {16, 8, 8};
  std::vector<int> strides = {8, 4, 4};

  bool operator==(const DiscriminatorConfig&) const = default;
};

struct GeneratorNet {
  nn::Layout layout;
  nn::ConvSlots input;  // G3 only
  std::vector<nn::ConvSlots> encoder, decoder, blocks;
  nn::ConvSlots output;  // zero-initialized perturbation head
};

struct DiscriminatorNet {
  nn::Layout layout;
  std::vector<nn::ConvSlots> convs;
  nn::LinearSlots head;
};

inline std::shared_ptr<const GeneratorNet> make_generator_net(const GeneratorConfig& cfg) {
  auto net = std::make_shared<GeneratorNet>();
  auto& l = net->layout;
  const int k = cfg.kernel, pad = cfg.kernel / 2;
  if (cfg.id == GenId::G3) {
    require(cfg.res_blocks >= 1 && cfg.res_channels >= 1, "G3 needs residual blocks");
    const int c = cfg.res_channels, rk = cfg.res_kernel;
    net->input = nn::add_conv1d(l, 1, c, rk, 1, rk / 2);
    for (int b = 0; b < cfg.res_blocks; ++b) {
      const int dil = 1 << b;
      net->blocks.push_back(nn::add_conv1d(l, c, c, rk, 1, dil * (rk / 2), dil));
    }
    net->output = nn::add_conv1d(l, c, 1, rk, 1, rk / 2, 1, nn::Init::zeros);
  } else {
    require(cfg.widths.size() >= 1, "encoder needs at least one level");
    const std::size_t levels = cfg.widths.size();
    require(cfg.length % (std::size_t{1} << levels) == 0, "generator length must be divisible by 2^levels");
    int in_ch = 1;
    for (int w : cfg.widths) {
      net->encoder.push_back(nn::add_conv1d(l, in_ch, w, k, 2, pad));
      in_ch = w;
    }
    const bool unet = cfg.id == GenId::G1;
    // Decoder level j mirrors encoder level (levels-1-j).
    int cur = cfg.widths.back() + (unet ? 0 : cfg.noise_channels);
    for (std::size_t j = 0; j < levels; ++j) {
      const std::size_t mirror = levels - 1 - j;
      const int out = mirror == 0 ? cfg.widths[0] : cfg.widths[mirror - 1];
      net->decoder.push_back(nn::add_conv1d(l, cur, out, k, 1, pad));
      // U-Net concatenates the matching encoder activation (or the input at the top).
      cur = out + (unet ? (mirror == 0 ? 1 : cfg.widths[mirror - 1]) : 0);
    }
    net->output = nn::add_conv1d(l, cur, 1, k, 1, pad, 1, nn::Init::zeros);
  }
  return net;
}

inline std::shared_ptr<const DiscriminatorNet> make_discriminator_net(const DiscriminatorConfig& cfg) {
  require(cfg.widths.size() == cfg.kernels.size() && cfg.widths.size() == cfg.strides.size() && !cfg.widths.empty(),
          "discriminator config lists must have equal nonzero length");
  auto net = std::make_shared<DiscriminatorNet>();
  int in_ch = 1;
  for (std::size_t i = 0; i < cfg.widths.size(); ++i) {
    net->convs.push_back(nn::add_conv1d(net->layout, in_ch, cfg.widths[i], cfg.kernels[i], cfg.strides[i],
                                        std::max(0, (cfg.kernels[i] - cfg.strides[i]) / 2)));
    in_ch = cfg.widths[i];
  }
  net->head = nn::add_linear(net->layout, in_ch, 1);
  return net;
}

struct GanBundle {
  GenId id = GenId::G1;
  GeneratorConfig gen_config;
  DiscriminatorConfig disc_config;
  std::uint64_t seed = 0;
  std::vector<double> gen_params;
  std::vector<double> disc_params;
  bool trained = false;
  std::shared_ptr<const GeneratorNet> gen_net;
  std::shared_ptr<const DiscriminatorNet> disc_net;

  std::size_t length() const { return gen_config.length; }
};

inline GeneratorConfig default_generator_config(GenId id, std::size_t length = audio::kDefaultClipLength) {
  GeneratorConfig c;
  c.id = id;
  c.length = length;
  return c;
}

inline GanBundle build_gan_from(const GeneratorConfig& gcfg, const DiscriminatorConfig& dcfg, std::uint64_t seed) {
  GanBundle b;
  b.id = gcfg.id;
  b.gen_config = gcfg;
  b.disc_config = dcfg;
  b.seed = seed;
  b.gen_net = make_generator_net(gcfg);
  b.disc_net = make_discriminator_net(dcfg);
  b.gen_params = b.gen_net->layout.initialize(derive_seed(seed, "gan-generator", static_cast<std::uint64_t>(gcfg.id)));
  b.disc_params = b.disc_net->layout.initialize(derive_seed(seed, "gan-discriminator", static_cast<std::uint64_t>(gcfg.id)));
  return b;
}

inline GanBundle build_gan(GenId id, std::uint64_t seed, std::size_t length = audio::kDefaultClipLength) {
  DiscriminatorConfig d;
  d.length = length;
  return build_gan_from(default_generator_config(id, length), d, seed);
}

// Per-clip latent noise for G2, seeded from the clip content so that the
// attack stays a pure function of its input.
inline std::vector<double> bottleneck_noise(const GanBundle& gan, std::span<const double> clip, int channels, int length) {
  Fnv1a h;
  h.add(gan.seed);
  for (double s : clip) h.add(s);
  Rng rng(mix_seed(h.value()));
  std::vector<double> z(static_cast<std::size_t>(channels) * length);
  for (double& v : z) v = rng.normal();
  return z;
}

// Attacked waveform node (1, T) = tanh(x + delta(x)).
inline nn::Id generator_forward(const GanBundle& gan, nn::Binding& bind, nn::Id x) {
  auto& g = bind.graph();
  const auto& net = *gan.gen_net;
  const auto& cfg = gan.gen_config;
  const auto conv = [&](nn::Id h, const nn::ConvSlots& c) {
    return nn::conv1d(g, h, bind(c.weight), bind(c.bias), c.stride, c.pad, c.dilation);
  };
  nn::Id delta;
  if (cfg.id == GenId::G3) {
    nn::Id h = conv(x, net.input);
    for (const auto& blk : net.blocks) h = nn::add(g, h, conv(nn::leaky_relu(g, h), blk));
    delta = conv(nn::leaky_relu(g, h), net.output);
  } else {
    std::vector<nn::Id> skips{x};
    nn::Id h = x;
    for (const auto& e : net.encoder) {
      h = nn::leaky_relu(g, conv(h, e));
      skips.push_back(h);
    }
    skips.pop_back();  // the bottleneck itself is not a skip
    if (cfg.id == GenId::G2) {
      const int len = g.shape(h)[1];
      h = nn::concat_channels(g, h, g.constant(bottleneck_noise(gan, g.value(x), cfg.noise_channels, len), {cfg.noise_channels, len}));
    }
    for (const auto& d : net.decoder) {
      const nn::Id skip = skips.back();
      skips.pop_back();
      h = nn::leaky_relu(g, conv(nn::upsample_to(g, h, g.shape(skip)[1]), d));
      if (cfg.id == GenId::G1) h = nn::concat_channels(g, h, skip);
    }
    delta = conv(h, net.output);
  }
  return nn::tanh(g, nn::add(g, x, delta));
}

// Probability (scalar node) that the clip is real.
inline nn::Id discriminator_forward(const GanBundle& gan, nn::Binding& bind, nn::Id x) {
  auto& g = bind.graph();
  const auto& net = *gan.disc_net;
  nn::Id h = x;
  for (const auto& c : net.convs) h = nn::leaky_relu(g, nn::conv1d(g, h, bind(c.weight), bind(c.bias), c.stride, c.pad, c.dilation));
  h = nn::global_avg_pool(g, h);
  return nn::sigmoid(g, nn::linear(g, h, bind(net.head.weight), bind(net.head.bias)));
}

inline void check_length(const GanBundle& gan, const audio::Waveform& w) {
  if (w.size() != gan.length())
    throw invalid_input("generator " + to_string(gan.id) + " expects " + std::to_string(gan.length()) + " samples, got " +
                        std::to_string(w.size()));
}

inline audio::Waveform run_generator(const GanBundle& gan, const audio::Waveform& w) {
  check_length(gan, w);
  nn::Graph g;
  nn::Binding bind(g, gan.gen_params);
  const auto out = generator_forward(gan, bind, g.constant(w.samples, {1, static_cast<int>(w.size())}));
  audio::Waveform r;
  r.sample_rate_hz = w.sample_rate_hz;
  r.samples = g.value(out);
  return r;
}

// Attacked deepfake = G_A(fake).
inline audio::Waveform apply_attack(const GanBundle& gan, const audio::Waveform& fake) {
  audio::validate_waveform(fake);
  return run_generator(gan, fake);
}

inline double discriminate(const GanBundle& gan, const audio::Waveform& w) {
  if (w.size() != gan.disc_config.length) throw invalid_input("discriminator length mismatch");
  nn::Graph g;
  nn::Binding bind(g, gan.disc_params);
  return g.scalar(discriminator_forward(gan, bind, g.constant(w.samples, {1, static_cast<int>(w.size())})));
}

}  // namespace shield::afgan
