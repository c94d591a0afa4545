/*
 * nearps - near-field photometric stereo for facial detail recovery.
 *
 * File: include/nearps/io/pfm.hpp
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

#ifndef NEARPS_IO_PFM_HPP
#define NEARPS_IO_PFM_HPP

#include "nearps/core/error.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

namespace nearps::io {

/// Float image in memory: top row first, channels interleaved.
struct FloatImage
{
    int width = 0;
    int height = 0;
    int channels = 1; ///< 1 or 3
    std::vector<float> data;

    float& at(int x, int y, int c = 0) { return data[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
    float at(int x, int y, int c = 0) const
    {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
};

/**
 * Writes a little-endian PFM ("PF" for 3 channels, "Pf" for 1). As the format
 * requires, scanlines are stored bottom row first.
 */
inline void write_pfm(const std::string& path, const FloatImage& img)
{
    if (img.channels != 1 && img.channels != 3)
    {
        throw InvalidInput("PFM supports 1 or 3 channels");
    }
    if (img.data.size() != static_cast<std::size_t>(img.width) * img.height * img.channels)
    {
        throw InvalidInput("PFM image data size mismatch");
    }
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os)
    {
        throw IoError("cannot open PFM for writing", path);
    }
    os << (img.channels == 3 ? "PF" : "Pf") << '\n' << img.width << ' ' << img.height << '\n' << "-1.0\n";
    const std::size_t row = static_cast<std::size_t>(img.width) * img.channels;
    for (int y = img.height - 1; y >= 0; --y)
    {
        for (std::size_t i = 0; i < row; ++i)
        {
            std::uint32_t bits = std::bit_cast<std::uint32_t>(img.data[static_cast<std::size_t>(y) * row + i]);
            if constexpr (std::endian::native == std::endian::big)
            {
                bits = ((bits & 0xFF) << 24) | ((bits & 0xFF00) << 8) | ((bits >> 8) & 0xFF00) | (bits >> 24);
            }
            os.write(reinterpret_cast<const char*>(&bits), 4);
        }
    }
    if (!os)
    {
        throw IoError("failed writing PFM", path);
    }
}

inline FloatImage read_pfm(const std::string& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is)
    {
        throw IoError("cannot open PFM", path);
    }
    std::string tag;
    FloatImage img;
    double scale = 0.0;
    if (!(is >> tag >> img.width >> img.height >> scale))
    {
        throw IoError("malformed PFM header", path);
    }
    if (tag == "PF")
    {
        img.channels = 3;
    } else if (tag == "Pf")
    {
        img.channels = 1;
    } else
    {
        throw IoError("not a PFM file", path);
    }
    if (img.width <= 0 || img.height <= 0 || img.width > (1 << 16) || img.height > (1 << 16))
    {
        throw IoError("PFM dimensions out of range", path);
    }
    is.get(); // single whitespace after the scale
    const bool file_little = scale < 0.0;
    const bool swap = file_little != (std::endian::native == std::endian::little);
    const std::size_t row = static_cast<std::size_t>(img.width) * img.channels;
    img.data.resize(row * img.height);
    for (int y = img.height - 1; y >= 0; --y)
    {
        for (std::size_t i = 0; i < row; ++i)
        {
            std::uint32_t bits = 0;
            if (!is.read(reinterpret_cast<char*>(&bits), 4))
            {
                throw IoError("truncated PFM payload", path);
            }
            if (swap)
            {
                bits = ((bits & 0xFF) << 24) | ((bits & 0xFF00) << 8) | ((bits >> 8) & 0xFF00) | (bits >> 24);
            }
            img.data[static_cast<std::size_t>(y) * row + i] = std::bit_cast<float>(bits);
        }
    }
    return img;
}

} // namespace nearps::io

#endif // NEARPS_IO_PFM_HPP
