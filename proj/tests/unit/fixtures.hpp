#pragma once

// Shared fixture models and reference values. The numbers come from
// tests/oracle/fixtures.py (closed forms or 40-digit mpmath quadrature).

#include <string>

#include "bgw/model_io.hpp"

namespace fx {

inline bgw::ModelSpec model(int i) { return bgw::load_model(std::string(BGW_MODELS) + "/m" + std::to_string(i) + ".json"); }

inline std::string model_path(int i) { return std::string(BGW_MODELS) + "/m" + std::to_string(i) + ".json"; }

// M1
constexpr double m1_phi_half_1 = 0.56720935135101371;
constexpr double m1_phi_half_2 = 0.40325610810608225;
constexpr double m1_phi_half_5 = 0.21978729716055179;
constexpr double m1_phi_1_1 = 0.40325610810608225;
constexpr double m1_phi_1_2 = 0.22604886484865799;
constexpr double m1_phi_1_5 = 0.077022160247725108;
constexpr double m1_phi_2_1 = 0.25860994590948048;
constexpr double m1_phi_2_2 = 0.10331935091376574;
constexpr double m1_phi_2_5 = 0.017075558074542348;
constexpr double m1_atmin_G = 0.78846751321072391;
constexpr double m1_atmin_residual = 0.68941403165333328;
constexpr double m1_gen_up = 0.11849126110303081;
constexpr double m1_gen_kill = 1.3222631083454538;
constexpr double m1_W0_1 = 1.3105859683466667;
constexpr double m1_W1_2 = 2.4595799395297948;
constexpr double m1_W0_2 = 0.93175790504000017;
constexpr double m1_log_omega = -0.51082562376599073;
constexpr double m1_mean_10 = 1.6218604324326575;
constexpr double m1_mean_21 = 0.86558129729797258;
constexpr double m1_varphi_1 = 0.39444872453601071;
constexpr double m1_avalanche = 0.15558979628808566;
constexpr double m1_phiqq_ratio = 0.10793379815297774;
constexpr double m1_tilt_p0 = 0.95069390943299866;

// M2
constexpr double m2_lt_q2 = 0.38629436111989062;
constexpr double m2_lt_q3 = 0.31776616671934371;
constexpr double m2_varphi_3 = 0.1771243444677047;

// M3
constexpr double m3_log_omega = -0.8754687373538999;
constexpr double m3_mean_10 = 1.25;
constexpr double m3_varphi_half = 0.69722436226800535;
constexpr double m3_one_plus_x = 0.24306090567001338;

// M4
constexpr double m4_log_omega_upper = -0.26706278524904514;
constexpr double m4_psi_1 = 0.10666666666666667;
constexpr double m4_psi_2 = 0.042666666666666667;
constexpr double m4_mean_expl_1 = 1.92;
constexpr double m4_mean_expl_2 = 2.1333333333333333;

// M5
constexpr double m5_phi0_0 = 1.25;
constexpr double m5_phi0_1 = 0.42461740039577667;
constexpr double m5_phi0_2 = 0.20229559762533999;
constexpr double m5_phi0_3 = 0.11228686257697443;
constexpr double m5_p1 = 0.33969392031662133;
constexpr double m5_p2 = 0.161836478100272;

} // namespace fx
