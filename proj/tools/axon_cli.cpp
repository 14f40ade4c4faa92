/**
 * @file axon_cli.cpp
 * @brief Command-line driver: single runs, three-mode comparisons, parameter
 *        sweeps, dwell-time reporting, and kernel verification.
 *
 * Exit codes: 0 success, 2 configuration or usage error, 3 run aborted,
 * 4 verification failure (kernels --check).
 */

#include <cmath>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include <axon/harness.hpp>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitAborted = 3;
constexpr int kExitVerification = 4;

void print_usage(std::FILE* to) {
  std::fprintf(to,
               "usage: axon <command> [options]\n"
               "\n"
               "commands:\n"
               "  simulate --config F [--mode continuous|cetc|petc] [--out DIR]\n"
               "  compare  --config F [--out DIR]\n"
               "  sweep    --config F --param SECTION.FIELD --values V1,V2,... [--out DIR]\n"
               "  dwell    --config F\n"
               "  kernels  --config F [--check]\n"
               "\n"
               "options:\n"
               "  --force-h    accept a sampling period above the minimal dwell time\n"
               "  --lyapunov   record the Lyapunov monitor column V\n"
               "\n"
               "--mode and --out default to the experiment section of the config;\n"
               "an empty config file selects the reference scenario.\n");
}

struct CliArgs {
  std::string command;
  std::string config;
  std::string mode;
  std::string out;
  std::string param;
  std::string values;
  bool force_h = false;
  bool lyapunov = false;
  bool check = false;
};

/// Fills args from argv; returns false with a message on malformed input.
bool parse_args(int argc, char** argv, CliArgs& args, std::string& err) {
  if (argc < 2) {
    err = "missing command";
    return false;
  }
  args.command = argv[1];
  for (int i = 2; i < argc; ++i) {
    const std::string flag = argv[i];
    auto take_value = [&](std::string& slot) {
      if (i + 1 >= argc) {
        err = "flag " + flag + " needs a value";
        return false;
      }
      slot = argv[++i];
      return true;
    };
    if (flag == "--config") {
      if (!take_value(args.config)) return false;
    } else if (flag == "--mode") {
      if (!take_value(args.mode)) return false;
    } else if (flag == "--out") {
      if (!take_value(args.out)) return false;
    } else if (flag == "--param") {
      if (!take_value(args.param)) return false;
    } else if (flag == "--values") {
      if (!take_value(args.values)) return false;
    } else if (flag == "--force-h") {
      args.force_h = true;
    } else if (flag == "--lyapunov") {
      args.lyapunov = true;
    } else if (flag == "--check") {
      args.check = true;
    } else if (flag == "--help" || flag == "-h") {
      print_usage(stdout);
      std::exit(kExitOk);
    } else {
      err = "unknown flag " + flag;
      return false;
    }
  }
  if (args.config.empty()) {
    err = "--config is required";
    return false;
  }
  return true;
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  size_t start = 0;
  while (start <= s.size()) {
    const size_t comma = s.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(s.substr(start));
      break;
    }
    out.push_back(s.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

void print_metric_line(const char* label, double v, const char* unit) {
  if (std::isnan(v))
    std::printf("%s = not reached\n", label);
  else
    std::printf("%s = %.6g%s\n", label, v, unit);
}

void print_run_summary(const axon::RunResult& r, axon::ControllerMode mode) {
  const axon::RunMetrics& m = r.metrics;
  std::printf("mode = %s\n", axon::mode_name(mode));
  std::printf("steps = %lld, trigger checks = %lld, events = %lld\n",
              static_cast<long long>(m.step_count),
              static_cast<long long>(m.check_count),
              static_cast<long long>(m.event_count));
  print_metric_line("t_converge_l", m.t_converge_l, " s");
  print_metric_line("t_converge_c", m.t_converge_c, " s");
  std::printf("final |l - l_s| / l_s = %.6g\n", m.final_l_rel_err);
  std::printf("final rel L2 error = %.6g\n", m.final_err_l2_u);
  if (m.event_count >= 2) {
    std::printf("event gaps: min = %.6g s, mean = %.6g s, max = %.6g s\n",
                m.min_gap, m.mean_gap, m.max_gap);
  }
  if (r.aborted)
    std::printf("aborted: %s\n", r.abort_reason.c_str());
}

int cmd_simulate(const CliArgs& args) {
  const axon::ExperimentConfig cfg = axon::load_config(args.config, args.force_h);
  const axon::ControllerMode mode =
      axon::parse_mode(args.mode.empty() ? cfg.mode : args.mode);
  const std::string out = args.out.empty() ? cfg.output_dir : args.out;
  const axon::RunResult r = axon::run_and_write(cfg, mode, out, args.lyapunov);
  print_run_summary(r, mode);
  std::printf("artifacts in %s\n", out.c_str());
  return r.aborted ? kExitAborted : kExitOk;
}

int cmd_compare(const CliArgs& args) {
  const axon::ExperimentConfig cfg = axon::load_config(args.config, args.force_h);
  const std::string out = args.out.empty() ? cfg.output_dir : args.out;
  const axon::CompareOutcome res = axon::compare_all(cfg, out, args.lyapunov);
  const axon::RunResult* runs[] = {&res.continuous, &res.cetc, &res.petc};
  const axon::ControllerMode modes[] = {axon::ControllerMode::continuous,
                                        axon::ControllerMode::cetc,
                                        axon::ControllerMode::petc};
  for (int i = 0; i < 3; ++i) {
    print_run_summary(*runs[i], modes[i]);
    std::printf("\n");
  }
  std::printf("artifacts in %s\n", out.c_str());
  return res.any_aborted ? kExitAborted : kExitOk;
}

int cmd_sweep(const CliArgs& args, std::string& err) {
  if (args.param.empty() || args.values.empty()) {
    err = "sweep needs --param and --values";
    return kExitConfig;
  }
  const axon::ExperimentConfig cfg = axon::load_config(args.config, args.force_h);
  const axon::ControllerMode mode =
      axon::parse_mode(args.mode.empty() ? cfg.mode : args.mode);
  const std::string out = args.out.empty() ? cfg.output_dir : args.out;
  const auto points = axon::sweep_runs(cfg, args.param, split_csv(args.values),
                                       out, mode, args.force_h, args.lyapunov);
  bool any_aborted = false;
  for (const axon::SweepPoint& pt : points) {
    std::printf("%s = %s: events = %lld", args.param.c_str(), pt.token.c_str(),
                static_cast<long long>(pt.metrics.event_count));
    if (std::isnan(pt.metrics.t_converge_l))
      std::printf(", t_converge_l = not reached");
    else
      std::printf(", t_converge_l = %.6g s", pt.metrics.t_converge_l);
    std::printf("%s\n", pt.aborted ? ", aborted" : "");
    any_aborted = any_aborted || pt.aborted;
  }
  std::printf("artifacts in %s\n", out.c_str());
  return any_aborted ? kExitAborted : kExitOk;
}

int cmd_dwell(const CliArgs& args) {
  const axon::ExperimentConfig cfg = axon::load_config(args.config, args.force_h);
  const axon::DwellReport dw = axon::dwell_report(cfg);
  std::printf("rho1 = %.17g\n", dw.rho1);
  std::printf("q = %.17g\n", dw.q);
  std::printf("tau_integral = %.17g s\n", dw.tau_integral);
  std::printf("tau_closed = %.17g s\n", dw.tau_closed);
  std::printf("h = %.17g s\n", dw.h);
  std::printf("h <= min(tau): %s\n", dw.h_ok ? "yes" : "no (forced)");
  return kExitOk;
}

int cmd_kernels(const CliArgs& args) {
  const axon::ExperimentConfig cfg = axon::load_config(args.config, args.force_h);
  bool all_ok = false;
  const nlohmann::json report = axon::kernel_report(cfg, all_ok);
  std::printf("%s\n", report.dump(2).c_str());
  if (args.check && !all_ok) {
    std::fprintf(stderr, "kernel verification failed\n");
    return kExitVerification;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CliArgs args;
  std::string err;
  if (!parse_args(argc, argv, args, err)) {
    std::fprintf(stderr, "error: %s\n\n", err.c_str());
    print_usage(stderr);
    return kExitConfig;
  }

  try {
    if (args.command == "simulate") return cmd_simulate(args);
    if (args.command == "compare") return cmd_compare(args);
    if (args.command == "sweep") {
      const int code = cmd_sweep(args, err);
      if (code == kExitConfig && !err.empty()) {
        std::fprintf(stderr, "error: %s\n\n", err.c_str());
        print_usage(stderr);
      }
      return code;
    }
    if (args.command == "dwell") return cmd_dwell(args);
    if (args.command == "kernels") return cmd_kernels(args);
    std::fprintf(stderr, "error: unknown command %s\n\n", args.command.c_str());
    print_usage(stderr);
    return kExitConfig;
  } catch (const axon::ConfigError& ex) {
    std::fprintf(stderr, "config error: %s\n", ex.what());
    return kExitConfig;
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "run failed: %s\n", ex.what());
    return kExitAborted;
  }
}
