/*
 * nearps - near-field photometric stereo for facial detail recovery.
 *
 * File: include/nearps/io/container.hpp
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

#ifndef NEARPS_IO_CONTAINER_HPP
#define NEARPS_IO_CONTAINER_HPP

#include "nearps/core/error.hpp"
#include "nearps/core/face_model.hpp"

#include "json.hpp"

#include "Eigen/Core"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

/**
 * Binary array container.
 *
 * Layout (all integers little-endian):
 *   bytes 0..7   magic "NPSARR01"
 *   bytes 8..15  uint64 length H of the JSON header
 *   H bytes      JSON: {"format":"nearps-arrays","version":1,
 *                       "arrays":[{"name":..,"shape":[..],"dtype":"<f8","offset":..}, ...]}
 *   zero padding up to a multiple of 8 bytes
 *   payload      each array as row-major little-endian float64, at its byte offset from payload start
 */
namespace nearps::io {

struct NamedArray
{
    std::string name;
    std::vector<std::int64_t> shape;
    std::vector<double> data; ///< row-major

    std::int64_t element_count() const
    {
        return std::accumulate(shape.begin(), shape.end(), std::int64_t{1}, std::multiplies<>());
    }
};

inline constexpr char kContainerMagic[9] = "NPSARR01";

namespace detail {

inline std::uint64_t to_little_endian(std::uint64_t v)
{
    if constexpr (std::endian::native == std::endian::big)
    {
        std::uint64_t out = 0;
        for (int i = 0; i < 8; ++i)
        {
            out = (out << 8) | ((v >> (8 * i)) & 0xFF);
        }
        return out;
    }
    return v;
}

inline void write_doubles(std::ostream& os, const std::vector<double>& values)
{
    for (double d : values)
    {
        const std::uint64_t bits = to_little_endian(std::bit_cast<std::uint64_t>(d));
        os.write(reinterpret_cast<const char*>(&bits), 8);
    }
}

} // namespace detail

inline void write_container(const std::string& path, const std::vector<NamedArray>& arrays)
{
    nlohmann::json header;
    header["format"] = "nearps-arrays";
    header["version"] = 1;
    header["arrays"] = nlohmann::json::array();
    std::uint64_t offset = 0;
    for (const auto& a : arrays)
    {
        if (a.element_count() != static_cast<std::int64_t>(a.data.size()))
        {
            throw InvalidInput("array '" + a.name + "' shape does not match its data length");
        }
        header["arrays"].push_back({{"name", a.name}, {"shape", a.shape}, {"dtype", "<f8"}, {"offset", offset}});
        offset += 8 * a.data.size();
    }
    const std::string text = header.dump();
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os)
    {
        throw IoError("cannot open container for writing", path);
    }
    os.write(kContainerMagic, 8);
    const std::uint64_t len = detail::to_little_endian(text.size());
    os.write(reinterpret_cast<const char*>(&len), 8);
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    const std::size_t pad = (8 - (16 + text.size()) % 8) % 8;
    const char zeros[8] = {};
    os.write(zeros, static_cast<std::streamsize>(pad));
    for (const auto& a : arrays)
    {
        detail::write_doubles(os, a.data);
    }
    if (!os)
    {
        throw IoError("failed writing container", path);
    }
}

inline std::vector<NamedArray> read_container(const std::string& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is)
    {
        throw IoError("cannot open container", path);
    }
    char magic[8];
    std::uint64_t len = 0;
    if (!is.read(magic, 8) || std::memcmp(magic, kContainerMagic, 8) != 0)
    {
        throw IoError("not an array container (bad magic)", path);
    }
    if (!is.read(reinterpret_cast<char*>(&len), 8))
    {
        throw IoError("truncated container header", path);
    }
    len = detail::to_little_endian(len);
    if (len > (1ull << 30))
    {
        throw IoError("container header too large", path);
    }
    std::string text(len, '\0');
    if (!is.read(text.data(), static_cast<std::streamsize>(len)))
    {
        throw IoError("truncated container header", path);
    }
    const std::size_t pad = (8 - (16 + len) % 8) % 8;
    is.ignore(static_cast<std::streamsize>(pad));
    const std::streamoff payload_start = is.tellg();

    nlohmann::json header;
    try
    {
        header = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e)
    {
        throw IoError(std::string("invalid container header JSON (") + e.what() + ")", path);
    }
    std::vector<NamedArray> arrays;
    for (const auto& entry : header.at("arrays"))
    {
        NamedArray a;
        a.name = entry.at("name").get<std::string>();
        a.shape = entry.at("shape").get<std::vector<std::int64_t>>();
        if (entry.value("dtype", std::string("<f8")) != "<f8")
        {
            throw IoError("unsupported dtype for array '" + a.name + "'", path);
        }
        const auto offset = entry.at("offset").get<std::uint64_t>();
        const auto count = a.element_count();
        if (count < 0)
        {
            throw IoError("negative shape for array '" + a.name + "'", path);
        }
        a.data.resize(static_cast<std::size_t>(count));
        is.seekg(payload_start + static_cast<std::streamoff>(offset));
        for (auto& d : a.data)
        {
            std::uint64_t bits = 0;
            if (!is.read(reinterpret_cast<char*>(&bits), 8))
            {
                throw IoError("truncated payload for array '" + a.name + "'", path);
            }
            d = std::bit_cast<double>(detail::to_little_endian(bits));
        }
        arrays.push_back(std::move(a));
    }
    return arrays;
}

inline const NamedArray& find_array(const std::vector<NamedArray>& arrays, const std::string& name)
{
    for (const auto& a : arrays)
    {
        if (a.name == name)
        {
            return a;
        }
    }
    throw InvalidInput("container has no array named '" + name + "'");
}

inline NamedArray from_vector(const std::string& name, const Eigen::VectorXd& v)
{
    return {name, {v.size()}, std::vector<double>(v.data(), v.data() + v.size())};
}

inline NamedArray from_matrix(const std::string& name, const Eigen::MatrixXd& m)
{
    NamedArray a{name, {m.rows(), m.cols()}, {}};
    a.data.resize(static_cast<std::size_t>(m.size()));
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(a.data.data(), m.rows(),
                                                                                       m.cols()) = m;
    return a;
}

inline Eigen::VectorXd to_vector(const NamedArray& a)
{
    return Eigen::Map<const Eigen::VectorXd>(a.data.data(), static_cast<Eigen::Index>(a.data.size()));
}

inline Eigen::MatrixXd to_matrix(const NamedArray& a)
{
    if (a.shape.size() != 2)
    {
        throw InvalidInput("array '" + a.name + "' is not two-dimensional");
    }
    return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        a.data.data(), a.shape[0], a.shape[1]);
}

inline NamedArray from_triangles(const std::string& name, const std::vector<Triangle>& tris)
{
    NamedArray a{name, {static_cast<std::int64_t>(tris.size()), 3}, {}};
    a.data.reserve(tris.size() * 3);
    for (const auto& t : tris)
    {
        for (int idx : t)
        {
            a.data.push_back(static_cast<double>(idx));
        }
    }
    return a;
}

inline std::vector<Triangle> to_triangles(const NamedArray& a)
{
    if (a.shape.size() != 2 || a.shape[1] != 3)
    {
        throw InvalidInput("array '" + a.name + "' is not an n x 3 index array");
    }
    std::vector<Triangle> tris(static_cast<std::size_t>(a.shape[0]));
    for (std::size_t i = 0; i < tris.size(); ++i)
    {
        for (int k = 0; k < 3; ++k)
        {
            tris[i][k] = static_cast<int>(a.data[3 * i + k]);
        }
    }
    return tris;
}

inline void save_model(const std::string& path, const LinearFaceModel& model)
{
    validate(model);
    write_container(path, {from_vector("mean_shape", model.mean_shape), from_vector("mean_albedo", model.mean_albedo),
                           from_matrix("basis_id", model.basis_id), from_matrix("basis_exp", model.basis_exp),
                           from_matrix("basis_albedo", model.basis_albedo),
                           from_triangles("triangles", model.triangles)});
}

inline LinearFaceModel load_model(const std::string& path)
{
    const auto arrays = read_container(path);
    LinearFaceModel model;
    model.mean_shape = to_vector(find_array(arrays, "mean_shape"));
    model.mean_albedo = to_vector(find_array(arrays, "mean_albedo"));
    model.basis_id = to_matrix(find_array(arrays, "basis_id"));
    model.basis_exp = to_matrix(find_array(arrays, "basis_exp"));
    model.basis_albedo = to_matrix(find_array(arrays, "basis_albedo"));
    model.triangles = to_triangles(find_array(arrays, "triangles"));
    validate(model);
    return model;
}

} // namespace nearps::io

#endif // NEARPS_IO_CONTAINER_HPP
