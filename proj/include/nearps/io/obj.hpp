/*
 * nearps - near-field photometric stereo for facial detail recovery.
 *
 * File: include/nearps/io/obj.hpp
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

#ifndef NEARPS_IO_OBJ_HPP
#define NEARPS_IO_OBJ_HPP

#include "nearps/core/types.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>

// Wavefront OBJ with per-vertex colour on the v lines: "v x y z r g b".
namespace nearps::io {

/// Shortest round-trip decimal representation; used wherever byte-stable text output matters.
inline std::string format_double(double v)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline void write_obj(std::ostream& os, const FaceMesh& mesh)
{
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i)
    {
        const Vec3& v = mesh.vertices[i];
        os << "v " << format_double(v.x()) << ' ' << format_double(v.y()) << ' ' << format_double(v.z());
        if (i < mesh.albedo.size())
        {
            const Rgb& a = mesh.albedo[i];
            os << ' ' << format_double(a.x()) << ' ' << format_double(a.y()) << ' ' << format_double(a.z());
        }
        os << '\n';
    }
    for (const auto& t : mesh.triangles)
    {
        os << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
    }
}

inline void write_obj(const std::string& path, const FaceMesh& mesh)
{
    std::ofstream os(path, std::ios::trunc);
    if (!os)
    {
        throw IoError("cannot open OBJ for writing", path);
    }
    write_obj(os, mesh);
    if (!os)
    {
        throw IoError("failed writing OBJ", path);
    }
}

/**
 * Reads vertices (with optional colour) and triangular faces. Vertices
 * without colour get albedo (1,1,1). Face tokens may carry "/vt/vn" suffixes;
 * negative (relative) indices are supported.
 */
inline FaceMesh read_obj(std::istream& is, const std::string& source = "<stream>")
{
    FaceMesh mesh;
    std::string line;
    int line_no = 0;
    while (std::getline(is, line))
    {
        ++line_no;
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag) || tag[0] == '#')
        {
            continue;
        }
        if (tag == "v")
        {
            double x, y, z;
            if (!(ls >> x >> y >> z))
            {
                throw IoError("malformed vertex on line " + std::to_string(line_no), source);
            }
            double r, g, b;
            Rgb color = Rgb::Ones();
            if (ls >> r >> g >> b)
            {
                color = Rgb(r, g, b);
            }
            mesh.vertices.emplace_back(x, y, z);
            mesh.albedo.push_back(color);
        } else if (tag == "f")
        {
            std::vector<int> idx;
            std::string token;
            while (ls >> token)
            {
                const auto slash = token.find('/');
                int value = 0;
                const std::string head = token.substr(0, slash);
                const auto res = std::from_chars(head.data(), head.data() + head.size(), value);
                if (res.ec != std::errc() || value == 0)
                {
                    throw IoError("malformed face index on line " + std::to_string(line_no), source);
                }
                idx.push_back(value > 0 ? value - 1 : static_cast<int>(mesh.vertices.size()) + value);
            }
            if (idx.size() != 3)
            {
                throw InvalidInput("only triangular faces are supported (line " + std::to_string(line_no) + " of " +
                                   source + ")");
            }
            mesh.triangles.push_back({idx[0], idx[1], idx[2]});
        }
    }
    return mesh;
}

inline FaceMesh read_obj(const std::string& path)
{
    std::ifstream is(path);
    if (!is)
    {
        throw IoError("cannot open OBJ", path);
    }
    FaceMesh mesh = read_obj(is, path);
    validate(mesh);
    return mesh;
}

} // namespace nearps::io

#endif // NEARPS_IO_OBJ_HPP
