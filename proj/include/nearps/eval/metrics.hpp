/*
 * nearps - near-field photometric stereo for facial detail recovery.
 *
 * File: include/nearps/eval/metrics.hpp
 *
 * Copyright 2026 The nearps Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#ifndef NEARPS_EVAL_METRICS_HPP
#define NEARPS_EVAL_METRICS_HPP

#include "nearps/core/error.hpp"
#include "nearps/integrate/heightfield.hpp"
#include "nearps/io/png.hpp"
#include "nearps/render/image.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

namespace nearps {

/// Summary of a per-pixel or per-vertex error; `values` is NaN where nothing was evaluated.
struct ErrorReport
{
    double mean = 0.0;
    double median = 0.0;
    double rms = 0.0;
    std::size_t count = 0;
    std::string units;
    std::vector<double> values;
};

/// Statistics over the finite entries of `values`.
inline ErrorReport summarize(std::vector<double> values, std::string units)
{
    ErrorReport r;
    r.units = std::move(units);
    std::vector<double> finite;
    for (double v : values)
    {
        if (!std::isnan(v))
        {
            finite.push_back(v);
        }
    }
    if (finite.empty())
    {
        throw InsufficientData("no samples to summarise");
    }
    r.count = finite.size();
    double sum = 0.0;
    double sq = 0.0;
    for (double v : finite)
    {
        sum += v;
        sq += v * v;
    }
    r.mean = sum / static_cast<double>(r.count);
    r.rms = std::sqrt(sq / static_cast<double>(r.count));
    const std::size_t mid = finite.size() / 2;
    std::nth_element(finite.begin(), finite.begin() + static_cast<std::ptrdiff_t>(mid), finite.end());
    r.median = finite[mid];
    if (finite.size() % 2 == 0)
    {
        r.median = 0.5 * (r.median + *std::max_element(finite.begin(), finite.begin() + static_cast<std::ptrdiff_t>(mid)));
    }
    r.values = std::move(values);
    return r;
}

namespace detail {

inline void check_same_shape(const NormalMap& a, const NormalMap& b)
{
    if (a.width != b.width || a.height != b.height || a.normals.size() != b.normals.size() ||
        a.mask.size() != b.mask.size())
    {
        throw InvalidInput("normal maps differ in size");
    }
}

/// Mask intersection, further restricted by `region` when it is non-empty.
inline std::vector<std::uint8_t> evaluation_mask(const NormalMap& a, const NormalMap& b,
                                                 const std::vector<std::uint8_t>& region)
{
    if (!region.empty() && region.size() != a.mask.size())
    {
        throw InvalidInput("evaluation region differs in size from the normal maps");
    }
    std::vector<std::uint8_t> m(a.mask.size(), 0);
    for (std::size_t i = 0; i < m.size(); ++i)
    {
        m[i] = a.mask[i] && b.mask[i] && (region.empty() || region[i]) ? 1 : 0;
    }
    if (std::find(m.begin(), m.end(), 1) == m.end())
    {
        throw InsufficientData("normal maps share no evaluated pixel");
    }
    return m;
}

} // namespace detail

/**
 * Per-pixel angle in degrees between two normal maps over their mask
 * intersection (optionally restricted to `region`).
 */
inline ErrorReport angular_error(const NormalMap& estimated, const NormalMap& truth,
                                 const std::vector<std::uint8_t>& region = {})
{
    detail::check_same_shape(estimated, truth);
    const auto m = detail::evaluation_mask(estimated, truth, region);
    std::vector<double> values(m.size(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t i = 0; i < m.size(); ++i)
    {
        if (m[i])
        {
            // Same angle as acos of the clamped dot product, without its loss of precision near zero.
            const Vec3& a = estimated.normals[i];
            const Vec3& b = truth.normals[i];
            values[i] = std::atan2(a.cross(b).norm(), a.dot(b)) * 180.0 / std::numbers::pi;
        }
    }
    return summarize(std::move(values), "degrees");
}

/// Mean of 1 - n.n' over the mask intersection; lies in [0, 2].
inline double cosine_normal_error(const NormalMap& estimated, const NormalMap& truth,
                                  const std::vector<std::uint8_t>& region = {})
{
    detail::check_same_shape(estimated, truth);
    const auto m = detail::evaluation_mask(estimated, truth, region);
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < m.size(); ++i)
    {
        if (m[i])
        {
            sum += 1.0 - estimated.normals[i].dot(truth.normals[i]);
            ++count;
        }
    }
    return sum / static_cast<double>(count);
}

/// Pixels covered in every image with a strictly positive value in every channel.
inline std::vector<std::uint8_t> fully_lit_mask(const std::vector<RadianceImage>& images)
{
    if (images.empty())
    {
        throw InvalidInput("fully-lit mask needs at least one image");
    }
    std::vector<std::uint8_t> m(images.front().mask.size(), 1);
    for (const auto& img : images)
    {
        if (img.mask.size() != m.size())
        {
            throw InvalidInput("images differ in size");
        }
        for (std::size_t i = 0; i < m.size(); ++i)
        {
            m[i] = m[i] && img.mask[i] && img.pixels[i].minCoeff() > 0.0 ? 1 : 0;
        }
    }
    return m;
}

inline nlohmann::json report_to_json(const ErrorReport& r)
{
    return {{"mean", r.mean}, {"median", r.median}, {"rms", r.rms}, {"count", r.count}, {"units", r.units}};
}

namespace io {

/**
 * Error map as a single-channel PFM (0 where not evaluated) and a colour-coded
 * PNG spanning [0, hi].
 */
inline void write_error_map(const std::string& pfm_path, const std::string& png_path, int width, int height,
                            const std::vector<double>& values, double hi)
{
    if (values.size() != static_cast<std::size_t>(width) * height)
    {
        throw InvalidInput("error map does not match its dimensions");
    }
    FloatImage img{width, height, 1, std::vector<float>(values.size(), 0.0f)};
    for (std::size_t i = 0; i < values.size(); ++i)
    {
        img.data[i] = std::isnan(values[i]) ? 0.0f : static_cast<float>(values[i]);
    }
    write_pfm(pfm_path, img);
    write_colormap_png(png_path, width, height, values, 0.0, hi);
}

} // namespace io

} // namespace nearps

#endif // NEARPS_EVAL_METRICS_HPP
