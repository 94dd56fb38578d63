#pragma once

#include <optional>
#include <variant>

#include "dwipc/filters/config.hpp"
#include "dwipc/filters/curvature.hpp"
#include "dwipc/filters/mppca.hpp"
#include "dwipc/filters/tv.hpp"
#include "dwipc/volcore/series.hpp"

namespace dwipc::filters {

struct FilteredSeries {
  ComplexSeries series;
  // Only MPPCA estimates noise.
  std::optional<Volume3> sigma_re;
  std::optional<Volume3> sigma_im;
};

/// Smooths real and imaginary parts independently. TV and CF run per volume;
/// MPPCA runs jointly across volumes, once per part.
inline FilteredSeries filter_series(const ComplexSeries& in, const FilterConfig& cfg, const Exec& exec = {}) {
  in.validate();
  validate(cfg);
  FilteredSeries out;
  out.series.gradients = in.gradients;
  out.series.volumes.resize(in.size());

  if (const auto* mp = std::get_if<MppcaConfig>(&cfg)) {
    std::vector<Volume3> re, im;
    re.reserve(in.size());
    im.reserve(in.size());
    for (const auto& v : in.volumes) {
      re.push_back(v.re);
      im.push_back(v.im);
    }
    auto fre = mppca_denoise(re, *mp, exec);
    auto fim = mppca_denoise(im, *mp, exec);
    for (std::size_t k = 0; k < in.size(); ++k)
      out.series.volumes[k] = ComplexVolume3(std::move(fre.volumes[k]), std::move(fim.volumes[k]));
    out.sigma_re = std::move(fre.sigma);
    out.sigma_im = std::move(fim.sigma);
    return out;
  }

  // Slices of every (volume, part) pair are independent work items.
  const Dims d = in.dims();
  for (std::size_t k = 0; k < in.size(); ++k) out.series.volumes[k] = in.volumes[k];
  const std::size_t items = in.size() * 2 * d.nz;
  parallel_for(items, exec, [&](std::size_t item) {
    const std::size_t z = item % d.nz;
    const std::size_t part = (item / d.nz) % 2;
    const std::size_t k = item / (2 * d.nz);
    auto& dst = part == 0 ? out.series.volumes[k].re : out.series.volumes[k].im;
    if (const auto* tv = std::get_if<TvConfig>(&cfg)) {
      const auto u = tv_denoise_slice(dst.slice(z), d.nx, d.ny, tv->lambda, tv->iters);
      std::copy(u.begin(), u.end(), dst.slice(z).begin());
    } else {
      cf_denoise_slice(dst.slice(z), d.nx, d.ny, std::get<CfConfig>(cfg).iters);
    }
  });
  return out;
}

}  // namespace dwipc::filters
