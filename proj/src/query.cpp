#include "galvae/query.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "galvae/error.hpp"
#include "galvae/kernels.hpp"
#include "galvae/metrics.hpp"

namespace galvae {

std::vector<double> score_generated(std::span<const Vector> real_latents,
                                    std::span<const Vector> gen_latents, Aggregation agg) {
  if (real_latents.empty() || gen_latents.empty())
    throw DataError("score_generated: empty latent set");
  for (const auto* set : {&real_latents, &gen_latents})
    for (const auto& v : *set)
      if (norm(v) <= kMinLatentNorm) throw DataError("score_generated: zero-norm latent");
  return agg == Aggregation::mean ? kernels::mean_cosine_parallel(real_latents, gen_latents)
                                  : kernels::max_cosine_parallel(real_latents, gen_latents);
}

std::size_t keep_count(double fraction, std::size_t n) {
  const double raw = fraction * static_cast<double>(n);
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(raw + 1e-9)));
}

QueryResult select_top_fraction(std::span<const double> scores, double fraction) {
  if (scores.empty()) throw DataError("select_top_fraction: empty scores");
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw DataError("select_top_fraction: fraction must lie in (0, 1]");
  for (double s : scores)
    if (std::isnan(s)) throw NumericalError("select_top_fraction: NaN score");

  const std::size_t n = scores.size();
  const std::size_t k = keep_count(fraction, n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  QueryResult r;
  r.scores.assign(scores.begin(), scores.end());
  r.selected.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  r.threshold_score = scores[r.selected.back()];
  std::sort(r.selected.begin(), r.selected.end());
  return r;
}

}  // namespace galvae
