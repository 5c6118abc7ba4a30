// SPDX-License-Identifier: Apache-2.0
//
// mmaoa: beam-specific CIR simulation and angle-of-arrival estimation for 60 GHz links
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace mmaoa
{
    using cdouble = std::complex<double>;

    inline constexpr double kPi = std::numbers::pi;
    inline constexpr double kSpeedOfLight = 299792458.0; // m/s

    // Control/SC PHY chip time and 802.11ad channel 2 parameters
    inline constexpr double kChipTime = 0.57e-9;      // s
    inline constexpr double kCarrierHz = 60.48e9;     // Hz
    inline constexpr double kBandwidthHz = 1.76e9;    // Hz

    inline constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
    inline constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }

    // dBm to watts
    inline double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

    // Wrap an angle in degrees to (-180, 180]
    double wrap_deg(double deg);

    // Complex baseband samples on the chip grid
    struct ComplexSequence
    {
        std::vector<cdouble> values;
        double sample_period = kChipTime; // s

        std::size_t size() const { return values.size(); }
        const cdouble &operator[](std::size_t i) const { return values[i]; }
        cdouble &operator[](std::size_t i) { return values[i]; }
    };

    // Error raised when an input file cannot be parsed; carries the offending line number (1-based, 0 if unknown)
    class ParseError : public std::runtime_error
    {
    public:
        ParseError(const std::string &what, std::size_t line = 0)
            : std::runtime_error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
        std::size_t line() const { return line_; }

    private:
        std::size_t line_;
    };

    // Scenario geometry is invalid (transmitter inside an object, ...)
    class GeometryError : public std::invalid_argument
    {
    public:
        using std::invalid_argument::invalid_argument;
    };

    // Not enough beam measurements for the requested estimator
    class InsufficientMeasurements : public std::invalid_argument
    {
    public:
        using std::invalid_argument::invalid_argument;
    };
}
