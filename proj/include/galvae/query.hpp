#pragma once

#include <span>
#include <vector>

#include "galvae/numerics.hpp"

namespace galvae {

enum class Aggregation { mean, max };

struct QueryResult {
  std::vector<double> scores;        // one per generated image
  std::vector<std::size_t> selected; // ascending
  double threshold_score = 0.0;      // lowest selected score
};

/// score_j = aggregate over real i of cosine similarity(real_i, gen_j).
/// Throws DataError on empty sets, dimension mismatch or zero-norm latents.
std::vector<double> score_generated(std::span<const Vector> real_latents,
                                    std::span<const Vector> gen_latents,
                                    Aggregation agg = Aggregation::mean);

/// max(1, floor(fraction * n)); the floor forgives decimal round-off such as
/// 0.29 * 100 = 28.999999999999996.
std::size_t keep_count(double fraction, std::size_t n);

/// Keeps k = max(1, floor(fraction * n)) highest scores; ties go to the
/// lower index.
QueryResult select_top_fraction(std::span<const double> scores, double fraction);

}  // namespace galvae
