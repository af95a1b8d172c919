// cfhf: crystal-field and hyperfine levels, spectra and fits for Ho:LiYF4.
//
// Exit codes
//   0  success
//   1  internal error
//   2  usage (bad flags)
//   3  I/O (unreadable input, unwritable output)
//   4  parse (malformed config or dataset)
//   5  fit (no convergence, singular normal matrix)
//   6  model (symmetry classification or perturbative degeneracy)
//   7  invalid input values

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cfhf/commands.hpp"

namespace {

enum Exit { kOk = 0, kInternal = 1, kUsage = 2, kIo = 3, kParse = 4, kFit = 5, kModel = 6, kInvalid = 7 };

std::string fixture_dir() {
  if (const char* env = std::getenv("CFHF_FIXTURE_DIR"); env && *env) return env;
  return CFHF_DEFAULT_FIXTURE_DIR;
}

std::string fixture(const std::string& name) { return fixture_dir() + "/" + name; }

struct Common {
  std::string config;
  std::string output;
  std::string format = "csv";

  void attach(CLI::App* app) {
    app->add_option("--config", config, "configuration file (default: built-in reference parameters)");
    app->add_option("--output", output, "write here instead of stdout");
    app->add_option("--format", format, "output format")->check(CLI::IsMember({"csv", "json"}));
  }

  cfhf::RunConfig load() const { return config.empty() ? cfhf::RunConfig{} : cfhf::load_config(config); }

  void emit(const cfhf::Report& r) const {
    const auto f = format == "json" ? cfhf::OutputFormat::Json : cfhf::OutputFormat::Csv;
    if (output.empty()) {
      cfhf::render(std::cout, r, f);
      return;
    }
    std::ofstream out(output);
    if (!out) throw cfhf::IoError("cannot write '" + output + "'");
    cfhf::render(out, r, f);
    if (!out) throw cfhf::IoError("error while writing '" + output + "'");
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Crystal-field and hyperfine spectra of Ho3+ in LiYF4"};
  app.require_subcommand(1);

  Common levels_opt, hf_opt, fit_opt, analyze_opt, synth_opt;

  auto* levels = app.add_subcommand("levels", "crystal-field levels: energy, irrep, <Jz>");
  levels_opt.attach(levels);

  auto* hf = app.add_subcommand("hf", "hyperfine-resolved lines of one transition");
  hf_opt.attach(hf);
  std::string transition;
  bool perturbative = false;
  hf->add_option("--transition", transition, "e.g. 8.1-8.2 (default: [hf] transition of the config)");
  hf->add_flag("--perturbative", perturbative, "add second-order perturbative energies");

  auto* fit = app.add_subcommand("fit", "least-squares fit of a dataset");
  fit_opt.attach(fit);
  std::string mode = "cf_aj";
  std::string fit_data;
  fit->add_option("--mode", mode, "cf_aj | b | refindex")->check(CLI::IsMember({"cf_aj", "b", "refindex"}));
  fit->add_option("--data", fit_data, "dataset CSV (default: bundled line list, or refractive data for refindex)");

  auto* analyze = app.add_subcommand("analyze", "difference series, slopes and lambda coefficients");
  analyze_opt.attach(analyze);
  std::string analyze_data;
  analyze->add_option("--data", analyze_data, "dataset CSV (default: bundled line list)");

  auto* synth = app.add_subcommand("synth", "synthetic absorbance spectrum (wavenumber, absorbance)");
  synth_opt.attach(synth);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (levels->parsed()) {
      levels_opt.emit(cfhf::cmd_levels(levels_opt.load()));
    } else if (hf->parsed()) {
      const auto cfg = hf_opt.load();
      const auto t = transition.empty() ? cfg.hf_transition : cfhf::parse_transition(transition);
      hf_opt.emit(cfhf::cmd_hf(cfg, t, perturbative));
    } else if (fit->parsed()) {
      const auto m = mode == "b" ? cfhf::FitMode::B
                                 : mode == "refindex" ? cfhf::FitMode::RefractiveIndex : cfhf::FitMode::CfAj;
      if (fit_data.empty()) {
        fit_data = fixture(m == cfhf::FitMode::RefractiveIndex ? "refractive_index_synthetic.csv"
                                                               : "measured_transitions.csv");
      }
      fit_opt.emit(cfhf::cmd_fit(fit_opt.load(), fit_data, m));
    } else if (analyze->parsed()) {
      if (!analyze_opt.config.empty()) analyze_opt.load();  // validated, not otherwise used
      analyze_opt.emit(cfhf::cmd_analyze(analyze_data.empty() ? fixture("measured_transitions.csv") : analyze_data));
    } else if (synth->parsed()) {
      synth_opt.emit(cfhf::cmd_synth(synth_opt.load()));
    }
  } catch (const cfhf::IoError& e) {
    std::cerr << "cfhf: I/O error: " << e.what() << '\n';
    return kIo;
  } catch (const cfhf::ParseError& e) {
    std::cerr << "cfhf: parse error: " << e.what() << '\n';
    return kParse;
  } catch (const cfhf::FitError& e) {
    std::cerr << "cfhf: fit failed: " << e.what() << '\n';
    return kFit;
  } catch (const cfhf::SymmetryError& e) {
    std::cerr << "cfhf: model error: " << e.what() << '\n';
    return kModel;
  } catch (const cfhf::DegeneracyError& e) {
    std::cerr << "cfhf: model error: " << e.what() << '\n';
    return kModel;
  } catch (const cfhf::InvalidArgument& e) {
    std::cerr << "cfhf: invalid input: " << e.what() << '\n';
    return kInvalid;
  } catch (const std::exception& e) {
    std::cerr << "cfhf: internal error: " << e.what() << '\n';
    return kInternal;
  }
  return kOk;
}
