/*
 * nearps - near-field photometric stereo for facial detail recovery.
 *
 * File: include/nearps/io/png.hpp
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

#ifndef NEARPS_IO_PNG_HPP
#define NEARPS_IO_PNG_HPP

#include "nearps/core/error.hpp"
#include "nearps/io/pfm.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

namespace nearps::io {

/**
 * Writes an 8- or 16-bit RGB/grey PNG. `samples` holds width*height*channels
 * values in [0, 2^bit_depth - 1], top row first.
 */
inline void write_png(const std::string& path, int width, int height, int channels, int bit_depth,
                      const std::vector<std::uint16_t>& samples)
{
    if ((channels != 1 && channels != 3) || (bit_depth != 8 && bit_depth != 16))
    {
        throw InvalidInput("PNG writer supports 1/3 channels at 8/16 bits");
    }
    std::unique_ptr<std::FILE, int (*)(std::FILE*)> fp(std::fopen(path.c_str(), "wb"), &std::fclose);
    if (!fp)
    {
        throw IoError("cannot open PNG for writing", path);
    }
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info)
    {
        png_destroy_write_struct(&png, &info);
        throw IoError("libpng initialisation failed", path);
    }
    const std::size_t bytes_per_sample = bit_depth / 8;
    const std::size_t stride = static_cast<std::size_t>(width) * channels * bytes_per_sample;
    std::vector<unsigned char> rows(stride * height);
    for (std::size_t i = 0; i < samples.size(); ++i)
    {
        if (bit_depth == 8)
        {
            rows[i] = static_cast<unsigned char>(samples[i]);
        } else
        {
            rows[2 * i] = static_cast<unsigned char>(samples[i] >> 8); // PNG is big-endian
            rows[2 * i + 1] = static_cast<unsigned char>(samples[i] & 0xFF);
        }
    }
    std::vector<png_bytep> row_ptrs(height);
    for (int y = 0; y < height; ++y)
    {
        row_ptrs[y] = rows.data() + stride * y;
    }
    if (setjmp(png_jmpbuf(png)))
    {
        png_destroy_write_struct(&png, &info);
        throw IoError("libpng failed while writing", path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, width, height, bit_depth, channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, row_ptrs.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

inline double srgb_encode(double linear)
{
    const double c = std::clamp(linear, 0.0, 1.0);
    return c <= 0.0031308 ? 12.92 * c : 1.055 * std::pow(c, 1.0 / 2.4) - 0.055;
}

/**
 * 16-bit sRGB preview of a linear float image. Values are divided by
 * `white` (the image maximum when white <= 0) before encoding.
 */
inline void write_preview_png(const std::string& path, const FloatImage& img, double white = 0.0)
{
    if (white <= 0.0)
    {
        for (float v : img.data)
        {
            white = std::max(white, static_cast<double>(v));
        }
        if (white <= 0.0)
        {
            white = 1.0;
        }
    }
    std::vector<std::uint16_t> samples(img.data.size());
    for (std::size_t i = 0; i < img.data.size(); ++i)
    {
        samples[i] = static_cast<std::uint16_t>(std::lround(65535.0 * srgb_encode(img.data[i] / white)));
    }
    write_png(path, img.width, img.height, img.channels, 16, samples);
}

/**
 * Jet-style colour ramp: t in [0,1] maps dark blue -> blue -> cyan -> yellow -> red -> dark red.
 */
inline std::array<double, 3> jet(double t)
{
    t = std::clamp(t, 0.0, 1.0);
    auto ramp = [](double x) { return std::clamp(1.5 - std::abs(x), 0.0, 1.0); };
    return {ramp(4.0 * t - 3.0), ramp(4.0 * t - 2.0), ramp(4.0 * t - 1.0)};
}

/**
 * Colour-coded 8-bit PNG of a scalar map: value v maps to jet((v - lo) / (hi - lo)).
 * NaN entries (outside the evaluated region) are written black.
 */
inline void write_colormap_png(const std::string& path, int width, int height, const std::vector<double>& values,
                               double lo, double hi)
{
    std::vector<std::uint16_t> samples(static_cast<std::size_t>(width) * height * 3, 0);
    for (std::size_t i = 0; i < values.size(); ++i)
    {
        if (std::isnan(values[i]))
        {
            continue;
        }
        const auto c = jet((values[i] - lo) / (hi - lo));
        for (int k = 0; k < 3; ++k)
        {
            samples[3 * i + k] = static_cast<std::uint16_t>(std::lround(255.0 * c[k]));
        }
    }
    write_png(path, width, height, 3, 8, samples);
}

} // namespace nearps::io

#endif // NEARPS_IO_PNG_HPP
