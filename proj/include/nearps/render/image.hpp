/*
 * nearps - near-field photometric stereo for facial detail recovery.
 *
 * File: include/nearps/render/image.hpp
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

#ifndef NEARPS_RENDER_IMAGE_HPP
#define NEARPS_RENDER_IMAGE_HPP

#include "nearps/core/types.hpp"
#include "nearps/io/pfm.hpp"

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

namespace nearps {

/**
 * Linear RGB radiance image with a coverage mask.
 */
struct RadianceImage
{
    int width = 0;
    int height = 0;
    std::vector<Rgb> pixels;          ///< row-major, non-negative
    std::vector<std::uint8_t> mask;   ///< 1 where the face covers the pixel

    RadianceImage() = default;
    RadianceImage(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, Rgb::Zero()),
                                  mask(static_cast<std::size_t>(w) * h, 0)
    {
    }

    std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
    const Rgb& at(int x, int y) const { return pixels[index(x, y)]; }
    Rgb& at(int x, int y) { return pixels[index(x, y)]; }
    bool covered(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height && mask[index(x, y)]; }

    std::size_t coverage() const { return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1)); }

    double peak() const
    {
        double m = 0.0;
        for (std::size_t i = 0; i < pixels.size(); ++i)
        {
            if (mask[i])
            {
                m = std::max(m, pixels[i].maxCoeff());
            }
        }
        return m;
    }
};

inline void validate(const RadianceImage& img)
{
    const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
    if (img.width <= 0 || img.height <= 0 || img.pixels.size() != n || img.mask.size() != n)
    {
        throw InvalidInput("radiance image buffers do not match its dimensions");
    }
    for (const auto& p : img.pixels)
    {
        if (!(p.minCoeff() >= 0.0) || !p.allFinite())
        {
            throw InvalidInput("radiance image has negative or non-finite pixels");
        }
    }
}

namespace io {

inline FloatImage to_float_image(const RadianceImage& img)
{
    FloatImage out{img.width, img.height, 3, std::vector<float>(img.pixels.size() * 3)};
    for (std::size_t i = 0; i < img.pixels.size(); ++i)
    {
        for (int c = 0; c < 3; ++c)
        {
            out.data[3 * i + c] = static_cast<float>(img.pixels[i][c]);
        }
    }
    return out;
}

inline FloatImage mask_to_float_image(int width, int height, const std::vector<std::uint8_t>& mask)
{
    FloatImage out{width, height, 1, std::vector<float>(mask.size())};
    for (std::size_t i = 0; i < mask.size(); ++i)
    {
        out.data[i] = mask[i] ? 1.0f : 0.0f;
    }
    return out;
}

/**
 * Reads a 3-channel PFM radiance image. The mask comes from `mask_path` when
 * given, otherwise from non-zero pixels.
 */
inline RadianceImage read_radiance(const std::string& path, const std::string& mask_path = {})
{
    const FloatImage f = read_pfm(path);
    if (f.channels != 3)
    {
        throw IoError("radiance image must have 3 channels", path);
    }
    RadianceImage img(f.width, f.height);
    for (std::size_t i = 0; i < img.pixels.size(); ++i)
    {
        img.pixels[i] = Rgb(f.data[3 * i], f.data[3 * i + 1], f.data[3 * i + 2]);
        img.mask[i] = img.pixels[i].maxCoeff() > 0.0 ? 1 : 0;
    }
    if (!mask_path.empty())
    {
        const FloatImage m = read_pfm(mask_path);
        if (m.width != f.width || m.height != f.height || m.channels != 1)
        {
            throw IoError("mask dimensions do not match the image", mask_path);
        }
        for (std::size_t i = 0; i < img.mask.size(); ++i)
        {
            img.mask[i] = m.data[i] > 0.5f ? 1 : 0;
        }
    }
    validate(img);
    return img;
}

inline void write_radiance(const std::string& path, const RadianceImage& img)
{
    write_pfm(path, to_float_image(img));
}

} // namespace io
} // namespace nearps

#endif // NEARPS_RENDER_IMAGE_HPP
