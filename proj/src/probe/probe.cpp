#include "latprobe/probe/probe.hpp"

#include <algorithm>
#include <cmath>

#include "latprobe/error.hpp"
#include "latprobe/simd/kernels.hpp"

namespace latprobe::probe {

std::string_view to_string(Arch a) noexcept {
  switch (a) {
    case Arch::linear: return "linear";
    case Arch::mlp1: return "mlp1";
    case Arch::mlp2: return "mlp2";
  }
  return "?";
}

Arch parse_arch(std::string_view s) {
  if (s == "linear") return Arch::linear;
  if (s == "mlp1") return Arch::mlp1;
  if (s == "mlp2") return Arch::mlp2;
  fail(ErrorKind::domain, "unknown probe architecture '" + std::string(s) + "'");
}

std::vector<LayerShape> ProbeParams::layers() const {
  std::vector<std::size_t> widths{in_dim};
  if (arch == Arch::mlp1) widths.push_back(hidden);
  if (arch == Arch::mlp2) {
    widths.push_back(hidden);
    widths.push_back(hidden);
  }
  widths.push_back(n_classes());
  std::vector<LayerShape> out;
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    LayerShape s{widths[l], widths[l + 1], off, off + widths[l] * widths[l + 1]};
    off = s.b_offset + s.out;
    out.push_back(s);
  }
  return out;
}

std::size_t ProbeParams::size() const {
  const auto ls = layers();
  return ls.back().b_offset + ls.back().out;
}

void ProbeParams::validate() const {
  require(n_classes() >= 2, ErrorKind::domain, "a probe needs at least 2 classes");
  require(in_dim >= 1, ErrorKind::domain, "probe input dimension must be positive");
  require(arch == Arch::linear || hidden >= 1, ErrorKind::domain, "hidden width must be positive");
  require(theta.size() == size(), ErrorKind::shape,
          "theta has " + std::to_string(theta.size()) + " entries, expected " +
              std::to_string(size()));
  for (double v : theta) require(std::isfinite(v), ErrorKind::numeric, "non-finite probe parameter");
}

ProbeParams zero_probe(Arch arch, std::size_t in_dim, std::vector<std::string> classes,
                       std::size_t hidden) {
  ProbeParams p;
  p.arch = arch;
  p.in_dim = in_dim;
  p.hidden = arch == Arch::linear ? 0 : hidden;
  p.classes = std::move(classes);
  p.theta.assign(p.size(), 0.0);
  p.validate();
  return p;
}

ProbeParams make_probe(Arch arch, std::size_t in_dim, std::vector<std::string> classes, Rng& rng,
                       std::size_t hidden) {
  ProbeParams p = zero_probe(arch, in_dim, std::move(classes), hidden);
  for (auto& v : p.theta) v = rng.uniform(-0.01, 0.01);
  return p;
}

std::vector<double> mask(std::span<const double> h, const subsets::Subset& c) {
  std::vector<double> out(h.size(), 0.0);
  for (std::size_t d : c) {
    require(d < h.size(), ErrorKind::shape,
            "subset index " + std::to_string(d) + " outside vector of length " +
                std::to_string(h.size()));
    out[d] = h[d];
  }
  return out;
}

Workspace::Workspace(const ProbeParams& p) : layers(p.layers()) {
  act.emplace_back(p.in_dim);
  for (const auto& l : layers) {
    act.emplace_back(l.out);
    delta.emplace_back(l.out);
  }
  log_probs.resize(p.n_classes());
}

void forward(const ProbeParams& p, std::span<const double> x, Workspace& ws) {
  if (x.size() != p.in_dim) {
    fail(ErrorKind::shape, "input has length " + std::to_string(x.size()) + ", probe expects " +
                               std::to_string(p.in_dim));
  }
  const auto& ls = ws.layers;
  std::copy(x.begin(), x.end(), ws.act[0].begin());
  const std::span<const double> theta(p.theta);
  for (std::size_t l = 0; l < ls.size(); ++l) {
    const auto& s = ls[l];
    auto& y = ws.act[l + 1];
    simd::gemv(theta.subspan(s.w_offset, s.in * s.out), ws.act[l], theta.subspan(s.b_offset, s.out),
               y);
    if (l + 1 < ls.size()) {
      for (auto& v : y) v = v > 0.0 ? v : 0.0;
    }
  }
  const auto& logits = ws.act.back();
  const double mx = *std::max_element(logits.begin(), logits.end());
  if (!std::isfinite(mx)) fail(ErrorKind::numeric, "non-finite activation in probe");
  double z = 0.0;
  for (double v : logits) z += std::exp(v - mx);
  const double lse = mx + std::log(z);
  for (std::size_t c = 0; c < logits.size(); ++c) ws.log_probs[c] = logits[c] - lse;
}

double log_prob_and_grad(const ProbeParams& p, std::span<const double> x, std::size_t label,
                         Workspace& ws, std::span<double> grad, double scale) {
  if (label >= p.n_classes()) fail(ErrorKind::domain, "label index out of range");
  forward(p, x, ws);
  const double lp = ws.log_probs[label];
  if (grad.empty()) return lp;
  if (grad.size() != p.theta.size()) fail(ErrorKind::shape, "gradient buffer has the wrong size");

  const auto& ls = ws.layers;
  const std::size_t last = ls.size() - 1;
  auto& d_out = ws.delta[last];
  for (std::size_t c = 0; c < d_out.size(); ++c) {
    d_out[c] = (c == label ? 1.0 : 0.0) - std::exp(ws.log_probs[c]);
  }
  const std::span<const double> theta(p.theta);
  for (std::size_t l = ls.size(); l-- > 0;) {
    const auto& s = ls[l];
    const auto& in = ws.act[l];
    const auto& d = ws.delta[l];
    for (std::size_t o = 0; o < s.out; ++o) {
      if (d[o] == 0.0) continue;
      const double g = scale * d[o];
      simd::axpy(g, in, grad.subspan(s.w_offset + o * s.in, s.in));
      grad[s.b_offset + o] += g;
    }
    if (l == 0) break;
    auto& prev = ws.delta[l - 1];
    std::fill(prev.begin(), prev.end(), 0.0);
    for (std::size_t o = 0; o < s.out; ++o) {
      if (d[o] == 0.0) continue;
      simd::axpy(d[o], theta.subspan(s.w_offset + o * s.in, s.in), prev);
    }
    for (std::size_t i = 0; i < prev.size(); ++i) {
      if (in[i] <= 0.0) prev[i] = 0.0;
    }
  }
  return lp;
}

std::vector<double> class_log_probs(const ProbeParams& p, std::span<const double> h,
                                    const subsets::Subset& c) {
  require(h.size() == p.in_dim, ErrorKind::shape, "representation length does not match probe");
  Workspace ws(p);
  forward(p, mask(h, c), ws);
  return ws.log_probs;
}

std::vector<double> weight_mask(const ProbeParams& p) {
  std::vector<double> m(p.theta.size(), 0.0);
  for (const auto& s : p.layers()) {
    std::fill_n(m.begin() + static_cast<std::ptrdiff_t>(s.w_offset), s.in * s.out, 1.0);
  }
  return m;
}

double elasticnet_penalty(const ProbeParams& p, double l1, double l2) {
  require(l1 >= 0.0 && l2 >= 0.0, ErrorKind::domain, "regularization weights must be >= 0");
  double a = 0.0, q = 0.0;
  for (const auto& s : p.layers()) {
    for (std::size_t i = 0; i < s.in * s.out; ++i) {
      const double v = p.theta[s.w_offset + i];
      a += std::abs(v);
      q += v * v;
    }
  }
  return l1 * a + l2 * q;
}

void add_elasticnet_grad(const ProbeParams& p, double l1, double l2, std::span<double> grad) {
  require(l1 >= 0.0 && l2 >= 0.0, ErrorKind::domain, "regularization weights must be >= 0");
  for (const auto& s : p.layers()) {
    for (std::size_t i = 0; i < s.in * s.out; ++i) {
      const std::size_t j = s.w_offset + i;
      const double v = p.theta[j];
      grad[j] += l1 * (v > 0.0 ? 1.0 : v < 0.0 ? -1.0 : 0.0) + 2.0 * l2 * v;
    }
  }
}

}  // namespace latprobe::probe
