#pragma once

#include <numbers>

// Internal unit system: lengths in nanometres and c = 1, so time is carried
// in nanometres of optical path (ct).  Frequencies are 1/nm, angular
// frequencies rad/nm.  Conversions to laboratory units live here.
namespace phc::units
{

inline constexpr double pi = std::numbers::pi;

// speed of light, nm per femtosecond
inline constexpr double c_nm_per_fs = 299.792458;

inline constexpr double ct_to_fs(double ct_nm)
{
    return ct_nm / c_nm_per_fs;
}

inline constexpr double fs_to_ct(double t_fs)
{
    return t_fs * c_nm_per_fs;
}

// angular frequency (rad/nm) of a vacuum wavelength
inline constexpr double omega_from_wavelength(double lambda_nm)
{
    return 2.0 * pi / lambda_nm;
}

inline constexpr double wavelength_from_omega(double omega)
{
    return 2.0 * pi / omega;
}

} // namespace phc::units
