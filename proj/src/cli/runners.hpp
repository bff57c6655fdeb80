#pragma once

#include "cli_util.hpp"

namespace flowguard::cli {

void run_gauss_attack(const RunContext& ctx);
void run_gauss_universal(const RunContext& ctx);
void run_gauss_tradeoff(const RunContext& ctx);
void run_gauss_certify(const RunContext& ctx);
void run_flow_train(const RunContext& ctx);
void run_flow_attack(const RunContext& ctx);
void run_flow_cross_eval(const RunContext& ctx);

} // namespace flowguard::cli
