/*
 * nearps - near-field photometric stereo for facial detail recovery.
 *
 * File: include/nearps/core/error.hpp
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

#ifndef NEARPS_CORE_ERROR_HPP
#define NEARPS_CORE_ERROR_HPP

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace nearps {

/**
 * Base class of every error thrown by the library.
 *
 * The CLI maps InvalidInput and IoError to exit code 2 and everything else
 * to exit code 1.
 */
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Caller-supplied data violates a precondition (dimension mismatch, bad range, ...).
class InvalidInput : public Error
{
public:
    using Error::Error;
};

class IoError : public Error
{
public:
    IoError(const std::string& what, std::string path) : Error(what + ": " + path), path_(std::move(path)) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

/// A triangle with zero area, or another geometric configuration without a defined normal.
class DegenerateGeometry : public Error
{
public:
    DegenerateGeometry(const std::string& what, int index) : Error(what), index_(index) {}
    int index() const noexcept { return index_; }

private:
    int index_;
};

class BehindCamera : public Error
{
public:
    using Error::Error;
};

/// Shading position coincides with a light position.
class Singularity : public Error
{
public:
    using Error::Error;
};

class NonConvergence : public Error
{
public:
    using Error::Error;
};

class InsufficientData : public Error
{
public:
    using Error::Error;
};

/// Per-triangle normal systems without enough constraints.
class UnderDetermined : public Error
{
public:
    UnderDetermined(const std::string& what, std::vector<int> triangles)
        : Error(what), triangles_(std::move(triangles))
    {
    }
    const std::vector<int>& triangles() const noexcept { return triangles_; }

private:
    std::vector<int> triangles_;
};

/// The least-squares system has a null space that the chosen weights do not fix.
class GaugeError : public Error
{
public:
    using Error::Error;
};

} // namespace nearps

#endif // NEARPS_CORE_ERROR_HPP
