#pragma once

// Classifiers p_theta(pi | h, C) over masked representations. Parameters are
// stored flat so optimizers and checkpoints can treat them as one vector.
// Layer l holds W_l (out x in, row-major) followed by b_l (out).

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "latprobe/rng.hpp"
#include "latprobe/subsets/families.hpp"

namespace latprobe::probe {

enum class Arch { linear, mlp1, mlp2 };

std::string_view to_string(Arch a) noexcept;
Arch parse_arch(std::string_view s);  // throws domain error

struct LayerShape {
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t w_offset = 0;  // into theta
  std::size_t b_offset = 0;
};

struct ProbeParams {
  Arch arch = Arch::linear;
  std::size_t in_dim = 0;
  std::size_t hidden = 0;  // ignored for linear
  std::vector<std::string> classes;
  std::vector<double> theta;

  std::size_t n_classes() const noexcept { return classes.size(); }
  std::vector<LayerShape> layers() const;
  std::size_t size() const;  // expected theta length

  void validate() const;
};

/// Shapes only; theta is zero.
ProbeParams zero_probe(Arch arch, std::size_t in_dim, std::vector<std::string> classes,
                       std::size_t hidden = 128);

/// All entries uniform(-0.01, 0.01).
ProbeParams make_probe(Arch arch, std::size_t in_dim, std::vector<std::string> classes, Rng& rng,
                       std::size_t hidden = 128);

/// h on C, zero elsewhere.
std::vector<double> mask(std::span<const double> h, const subsets::Subset& c);

/// Scratch buffers for one forward/backward pass. One per thread.
struct Workspace {
  explicit Workspace(const ProbeParams& p);

  std::vector<LayerShape> layers;
  std::vector<std::vector<double>> act;    // act[0] input, act[l+1] output of layer l
  std::vector<std::vector<double>> delta;  // d log p / d pre-activation, per layer
  std::vector<double> log_probs;
};

/// Runs the network on an already-masked input.
/// Fills ws.log_probs.
void forward(const ProbeParams& p, std::span<const double> x, Workspace& ws);

/// log p(label | x); when `grad` is non-empty adds scale * d/dtheta log p(label | x).
double log_prob_and_grad(const ProbeParams& p, std::span<const double> x, std::size_t label,
                         Workspace& ws, std::span<double> grad, double scale = 1.0);

/// Log-softmax of the network applied to mask(h, C).
std::vector<double> class_log_probs(const ProbeParams& p, std::span<const double> h,
                                    const subsets::Subset& c);

/// 1 for weight-matrix entries, 0 for biases.
std::vector<double> weight_mask(const ProbeParams& p);

/// l1 * sum|W| + l2 * sum W^2 over weight matrices.
double elasticnet_penalty(const ProbeParams& p, double l1, double l2);

/// grad += d/dtheta of the penalty (subgradient 0 at 0 for the L1 part).
void add_elasticnet_grad(const ProbeParams& p, double l1, double l2, std::span<double> grad);

}  // namespace latprobe::probe
