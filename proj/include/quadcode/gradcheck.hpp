#pragma once

// Central finite-difference verification of the analytic backward passes.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "quadcode/models.hpp"
#include "quadcode/rng.hpp"
#include "quadcode/text_encoding.hpp"

namespace quadcode {

struct GradCheckOptions {
  double epsilon = 1e-5;
  // Coordinates sampled per parameter tensor (all of them if smaller). The
  // largest-magnitude analytic coordinate is always included.
  std::size_t samples_per_parameter = 24;
  std::uint64_t seed = 0;
  // Run with a fixed training-mode dropout mask so dropout backward is
  // covered too.
  bool with_dropout = true;
  double conv_weight_grad_scale = 1.0;
  // Coordinates whose analytic and numeric gradients are both below this are
  // not compared: the central difference resolves only about 1e-11 at
  // epsilon 1e-5, so relative error there measures roundoff.
  double resolution_floor = 1e-6;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t checked = 0;
  // Coordinates where +/- epsilon moved a relu or pooling argmax; the loss is
  // not differentiable across those points, so they are not compared.
  std::size_t skipped_at_kinks = 0;
  std::size_t skipped_below_resolution = 0;
  // Trainable tensors none of whose sampled coordinates were compared.
  std::size_t uncovered_parameters = 0;
};

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / (std::abs(analytic) + std::abs(numeric) + 1e-12);
}

inline GradCheckResult finite_difference_check(Classifier& model,
                                               std::span<const std::int32_t> input, int label,
                                               const GradCheckOptions& options = {}) {
  const Rng root(options.seed);
  const Rng dropout = root.split(1);
  PassOptions pass;
  pass.dropout = options.with_dropout ? &dropout : nullptr;

  GradientSet analytic = model.zero_gradients();
  {
    PassOptions o = pass;
    o.conv_weight_grad_scale = options.conv_weight_grad_scale;
    model.run(input, o, label, &analytic);
  }

  auto loss_and_pattern = [&](std::vector<std::uint8_t>& pattern) {
    pattern.clear();
    PassOptions o = pass;
    o.activation_pattern = &pattern;
    return model.run(input, o, label).loss;
  };
  std::vector<std::uint8_t> base, plus, minus;
  loss_and_pattern(base);

  GradCheckResult result;
  Rng sampler = root.split(2);
  auto& params = model.parameters();
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (params[p].frozen) continue;
    nn::Tensor& value = params[p].value;
    const nn::Tensor& grad = analytic[p];
    const std::size_t n = value.size();

    std::vector<std::size_t> coords;
    if (n <= options.samples_per_parameter) {
      coords.resize(n);
      std::iota(coords.begin(), coords.end(), std::size_t{0});
    } else {
      std::size_t largest = 0;
      for (std::size_t i = 1; i < n; ++i) {
        if (std::abs(grad[i]) > std::abs(grad[largest])) largest = i;
      }
      coords.push_back(largest);
      while (coords.size() < options.samples_per_parameter) {
        coords.push_back(static_cast<std::size_t>(sampler.below(n)));
      }
    }

    const std::size_t checked_before = result.checked;
    for (std::size_t i : coords) {
      const double saved = value[i];
      value[i] = saved + options.epsilon;
      const double up = loss_and_pattern(plus);
      value[i] = saved - options.epsilon;
      const double down = loss_and_pattern(minus);
      value[i] = saved;
      if (plus != base || minus != base) {
        ++result.skipped_at_kinks;
        continue;
      }
      const double numeric = (up - down) / (2.0 * options.epsilon);
      if (std::max(std::abs(grad[i]), std::abs(numeric)) < options.resolution_floor) {
        ++result.skipped_below_resolution;
        continue;
      }
      const double err = relative_error(grad[i], numeric);
      ++result.checked;
      if (err > result.max_relative_error) {
        result.max_relative_error = err;
        result.worst_parameter = params[p].name + "[" + std::to_string(i) + "]";
      }
    }
    if (result.checked == checked_before) ++result.uncovered_parameters;
  }
  return result;
}


// Small models for gradient checks. The char stack cannot produce output
// below 33 input steps (7-conv, pool 3, three 3-convs, pool 3), so that is the
// tiny char length.
inline constexpr std::size_t kTinyCharSeqLen = 33;
inline constexpr std::uint64_t kTinyGradCheckAttempts = 16;

inline WordCnnConfig tiny_word_config() {
  WordCnnConfig c;
  c.vocab_size = 50;
  c.embed_dim = 6;
  c.seq_len = 16;
  c.branches = {{4, 3, 2}, {4, 4, 2}, {4, 5, 2}};
  c.hidden = 32;
  return c;
}

inline CharCnnConfig tiny_char_config() {
  CharCnnConfig c;
  c.alphabet_size = 8;
  c.embed_dim = 5;
  c.seq_len = kTinyCharSeqLen;
  for (auto& conv : c.convs) conv.frames = 12;
  c.hidden = {32, 32};
  return c;
}

struct TinyGradCheck {
  InputKind kind;
  GradCheckResult result;
};

// Builds the tiny model for `kind`, draws a random input (no padding) and
// label from `seed`, and checks every parameter tensor.
inline TinyGradCheck tiny_gradcheck(InputKind kind, std::uint64_t seed,
                                    double conv_weight_grad_scale = 1.0) {
  std::unique_ptr<Classifier> model;
  std::size_t symbols = 0, length = 0;
  if (kind == InputKind::kWord) {
    const auto c = tiny_word_config();
    model = std::make_unique<WordCnn>(c, seed);
    symbols = c.vocab_size;
    length = c.seq_len;
  } else {
    const auto c = tiny_char_config();
    model = std::make_unique<CharCnn>(c, seed);
    symbols = c.alphabet_size;
    length = c.seq_len;
  }
  GradCheckOptions options;
  options.conv_weight_grad_scale = conv_weight_grad_scale;
  // A draw that leaves a whole tensor inactive (every unit dead or dropped)
  // says nothing about that tensor, so further inputs are drawn.
  const Rng draws = Rng(seed).split(0x9c);
  GradCheckResult result;
  for (std::uint64_t attempt = 0; attempt < kTinyGradCheckAttempts; ++attempt) {
    Rng rng = draws.split(attempt);
    std::vector<std::int32_t> input(length);
    for (auto& v : input) v = static_cast<std::int32_t>(1 + rng.below(symbols - 1));
    const int label = static_cast<int>(rng.below(kNumClasses));
    options.seed = Rng(seed).split(attempt).next_u64();
    result = finite_difference_check(*model, input, label, options);
    if (result.uncovered_parameters == 0) break;
  }
  return {kind, result};
}

}  // namespace quadcode
