/*
 * nearps - near-field photometric stereo for facial detail recovery.
 *
 * File: include/nearps/io/scene_json.hpp
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

#ifndef NEARPS_IO_SCENE_JSON_HPP
#define NEARPS_IO_SCENE_JSON_HPP

#include "nearps/core/error.hpp"
#include "nearps/core/types.hpp"

#include "json.hpp"

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>

namespace nearps::io {

inline nlohmann::json camera_to_json(const CameraIntrinsics& cam)
{
    return {{"fx", cam.fx}, {"fy", cam.fy}, {"cx", cam.cx}, {"cy", cam.cy}, {"width", cam.width}, {"height", cam.height}};
}

inline CameraIntrinsics camera_from_json(const nlohmann::json& j)
{
    try
    {
        CameraIntrinsics cam{j.at("fx").get<double>(),  j.at("fy").get<double>(),   j.at("cx").get<double>(),
                             j.at("cy").get<double>(),  j.at("width").get<int>(), j.at("height").get<int>()};
        validate(cam);
        return cam;
    } catch (const nlohmann::json::exception& e)
    {
        throw InvalidInput(std::string("malformed camera: ") + e.what());
    }
}

inline nlohmann::json pose_to_json(const Pose& pose)
{
    return {{"pitch", pose.pitch},
            {"yaw", pose.yaw},
            {"roll", pose.roll},
            {"translation", {pose.translation.x(), pose.translation.y(), pose.translation.z()}}};
}

inline Pose pose_from_json(const nlohmann::json& j)
{
    try
    {
        Pose p;
        p.pitch = j.at("pitch").get<double>();
        p.yaw = j.at("yaw").get<double>();
        p.roll = j.at("roll").get<double>();
        const auto& t = j.at("translation");
        p.translation = Vec3(t.at(0).get<double>(), t.at(1).get<double>(), t.at(2).get<double>());
        return p;
    } catch (const nlohmann::json::exception& e)
    {
        throw InvalidInput(std::string("malformed pose: ") + e.what());
    }
}

inline nlohmann::json read_json(const std::string& path)
{
    std::ifstream is(path);
    if (!is)
    {
        throw IoError("cannot open JSON file", path);
    }
    try
    {
        return nlohmann::json::parse(is);
    } catch (const nlohmann::json::exception& e)
    {
        throw IoError(std::string("malformed JSON (") + e.what() + ")", path);
    }
}

/// Pretty-printed JSON with a trailing newline; the text depends only on the value.
inline std::string json_text(const nlohmann::json& j)
{
    return j.dump(2) + "\n";
}

inline void write_text(const std::string& path, const std::string& text)
{
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os)
    {
        throw IoError("cannot open file for writing", path);
    }
    os << text;
    if (!os)
    {
        throw IoError("failed writing file", path);
    }
}

inline void write_json(const std::string& path, const nlohmann::json& j)
{
    write_text(path, json_text(j));
}

/// 64-bit FNV-1a, stable across platforms and runs.
inline std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t h = 1469598103934665603ULL)
{
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < size; ++i)
    {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v)
{
    std::ostringstream os;
    os << std::hex;
    os.width(16);
    os.fill('0');
    os << v;
    return os.str();
}

} // namespace nearps::io

#endif // NEARPS_IO_SCENE_JSON_HPP
