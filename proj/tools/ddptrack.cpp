// ddptrack: unsupervised detection and tracking of arbitrary objects in video.
//
// Pipeline: synth -> extract -> track-mcmc | track-smc -> tracks -> eval -> report.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "ddptrack/eval.hpp"
#include "ddptrack/extract.hpp"
#include "ddptrack/mcmc.hpp"
#include "ddptrack/report.hpp"
#include "ddptrack/smc.hpp"
#include "ddptrack/synthgen.hpp"
#include "ddptrack/tracks.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using ordered_json = nlohmann::ordered_json;
using namespace ddptrack;

namespace {

constexpr const char* kVersion = "ddptrack 0.1.0";

struct HyperCli {
  double alpha = 0.1;
  double rho = 0.3;
  int M = 10;
  double kappa0 = 0.05;
  double nu0 = 5.0;
  double lambda0 = 1.0;  // diagonal value of Lambda0
  double q0 = 5.0;       // uniform Dirichlet pseudo-count
  int auxTrials = 0;     // 0 = L^2 from the observation header
  std::string preset = "synthetic";

  void addFlags(CLI::App* cmd) {
    cmd->add_option("--preset", preset, "Parameter preset: synthetic or pets")
        ->check(CLI::IsMember({"synthetic", "pets"}));
    cmd->add_option("--alpha", alpha, "DP concentration");
    cmd->add_option("--rho", rho, "Deletion parameter in (0,1]");
    cmd->add_option("--M", M, "Auxiliary variables per cluster per step");
    cmd->add_option("--kappa0", kappa0, "Prior mean scale");
    cmd->add_option("--nu0", nu0, "Prior covariance dof");
    cmd->add_option("--lambda0", lambda0, "Prior covariance scale (diagonal)");
    cmd->add_option("--q0", q0, "Dirichlet pseudo-count per hue bin");
    cmd->add_option("--aux-trials", auxTrials, "Multinomial trials for auxiliary colors (0 = L^2)");
  }

  Hyperparams build(const CLI::App* cmd, int V, int L) const {
    Hyperparams h = preset == "pets" ? Hyperparams::petsDefaults(V) : Hyperparams::syntheticDefaults(V);
    if (cmd->count("--alpha")) h.alpha = alpha;
    if (cmd->count("--rho")) h.rho = rho;
    if (cmd->count("--M")) h.M = M;
    if (cmd->count("--kappa0")) h.kappa0 = kappa0;
    if (cmd->count("--nu0")) h.nu0 = nu0;
    if (cmd->count("--lambda0")) h.Lambda0 = Mat2::Identity() * lambda0;
    if (cmd->count("--q0")) h.q0 = VecX::Constant(V, q0);
    h.auxTrialCount = auxTrials > 0 ? auxTrials : L * L;
    h.validate();
    return h;
  }

  ordered_json echo(const Hyperparams& h) const {
    ordered_json j;
    j["preset"] = preset;
    j["alpha"] = h.alpha;
    j["rho"] = h.rho;
    j["M"] = h.M;
    j["mu0"] = {h.mu0.x(), h.mu0.y()};
    j["kappa0"] = h.kappa0;
    j["nu0"] = h.nu0;
    j["lambda0"] = h.Lambda0(0, 0);
    j["q0"] = h.q0[0];
    j["V"] = h.V();
    j["auxTrials"] = h.auxTrialCount;
    return j;
  }
};

std::vector<eval::BoxTrack> toBoxTracks(const std::vector<tracks::Track>& trs) {
  std::vector<eval::BoxTrack> out;
  for (const auto& tr : trs) {
    eval::BoxTrack bt;
    bt.id = tr.objectId;
    for (const auto& e : tr.entries) {
      eval::Box b{e.bbox[0], e.bbox[1], e.bbox[2], e.bbox[3]};
      if (b.wellFormed()) bt.boxes[e.frame] = b;
    }
    out.push_back(std::move(bt));
  }
  return out;
}

int dispatch(int argc, char** argv) {
  CLI::App app{std::string(kVersion) + " - dependent Dirichlet process video tracker"};
  app.require_subcommand(1);

  // ---- synth ----
  auto* synthCmd = app.add_subcommand("synth", "Generate a synthetic square scenario");
  std::string scenario, synthOut;
  synthCmd->add_option("scenario", scenario, "cross-continue | cross-reverse | three-squares")
      ->required();
  synthCmd->add_option("out", synthOut, "Output directory")->required();
  synthCmd->callback([&] { synth::generateScenario(scenario, synthOut); });

  // ---- extract ----
  auto* exCmd = app.add_subcommand("extract", "Extract observations from a frame manifest");
  std::string manifestPath, obsOut;
  extract::ExtractionConfig exCfg;
  int exL = 3, exWorkers = 1, exCap = 500;
  std::string patchSource = "dominant";
  std::uint64_t exSeed = 0;
  exCmd->add_option("manifest", manifestPath, "manifest.json listing frames")->required();
  exCmd->add_option("out", obsOut, "Output observations (JSON lines)")->required();
  exCmd->add_option("--tau", exCfg.diffThreshold, "Differencing threshold (0-255)");
  exCmd->add_option("--L", exL, "Patch side length (odd)");
  exCmd->add_option("--V", exCfg.hueBins, "Hue bins");
  exCmd->add_option("--cap", exCap, "Max observations per frame (0 = unlimited)");
  exCmd->add_option("--scale", exCfg.spatialScale, "Pixels per scene unit (0 = larger dim / 9)");
  exCmd->add_option("--sat-floor", exCfg.saturationFloor, "Saturation floor for hue bins");
  exCmd->add_option("--patch-source", patchSource, "Patch frame: current | dominant")
      ->check(CLI::IsMember({"current", "dominant"}));
  exCmd->add_option("--seed", exSeed, "Subsampling seed");
  exCmd->add_option("--workers", exWorkers, "Worker threads");
  exCmd->callback([&] {
    if (exL < 1 || exL % 2 == 0) throw ConfigError("--L must be odd and >= 1");
    exCfg.patchHalfWidth = (exL - 1) / 2;
    exCfg.maxObsPerFrame = exCap > 0 ? std::optional<int>(exCap) : std::nullopt;
    exCfg.patchSource =
        patchSource == "current" ? extract::PatchSource::kCurrent : extract::PatchSource::kDominant;
    exCfg.seed = exSeed;
    exCfg.validate();
    int w = 0, h = 0;
    std::vector<std::string> files = extract::readManifest(manifestPath, w, h);
    if (files.size() < 2) throw DataError("manifest must list at least 2 frames");
    std::vector<extract::Frame> frames;
    frames.reserve(files.size());
    for (const auto& f : files) frames.push_back(extract::readImage(f));
    ObservationSet obs = extract::extractSequence(frames, exCfg, exWorkers);
    extract::writeObservations(obs, exCfg, frames[0].width, frames[0].height, obsOut);
  });

  // ---- track-mcmc ----
  auto* mcmcCmd = app.add_subcommand("track-mcmc", "Batch Gibbs inference (deletion variables)");
  std::string mcmcObsPath, mcmcOut, mcmcDiag, mcmcInit = "sequential-urn";
  HyperCli mcmcHyper;
  int mcmcSweeps = 200, mcmcSlack = 50;
  std::uint64_t mcmcSeed = 0;
  mcmcCmd->add_option("obs", mcmcObsPath, "Observation JSONL")->required();
  mcmcCmd->add_option("out", mcmcOut, "Output MAP state JSON")->required();
  mcmcCmd->add_option("--sweeps", mcmcSweeps, "Gibbs sweeps");
  mcmcCmd->add_option("--init", mcmcInit, "single-cluster | sequential-urn")
      ->check(CLI::IsMember({"single-cluster", "sequential-urn"}));
  mcmcCmd->add_option("--lifetime-slack", mcmcSlack, "Deletion-time cap beyond T");
  mcmcCmd->add_option("--seed", mcmcSeed, "RNG seed");
  mcmcCmd->add_option("--diagnostics", mcmcDiag, "Optional diagnostics CSV");
  mcmcHyper.addFlags(mcmcCmd);
  mcmcCmd->callback([&] {
    extract::ExtractionConfig echoCfg;
    int w = 0, h = 0;
    ObservationSet obs = extract::readObservations(mcmcObsPath, echoCfg, w, h);
    mcmc::McmcConfig cfg;
    cfg.sweeps = mcmcSweeps;
    cfg.seed = mcmcSeed;
    cfg.maxLifetimeSlack = mcmcSlack;
    cfg.hyper = mcmcHyper.build(mcmcCmd, echoCfg.hueBins, echoCfg.L());
    cfg.init = mcmcInit == "single-cluster" ? mcmc::McmcConfig::Init::kSingleCluster
                                            : mcmc::McmcConfig::Init::kSequentialUrn;
    mcmc::McmcResult res = mcmc::runMcmc(obs, cfg);
    res.map.width = w;
    res.map.height = h;
    res.map.scale = echoCfg.scaleFor(w, h);
    ordered_json header;
    header["tool"] = kVersion;
    header["command"] = "track-mcmc";
    header["sweeps"] = cfg.sweeps;
    header["init"] = mcmcInit;
    header["lifetimeSlack"] = cfg.maxLifetimeSlack;
    header["seed"] = cfg.seed;
    header["hyper"] = mcmcHyper.echo(cfg.hyper);
    writeLatentState(res.map, header.dump(), mcmcOut);
    if (!mcmcDiag.empty()) mcmc::writeDiagnosticsCsv(res.diagnostics, header.dump(), mcmcDiag);
  });

  // ---- track-smc ----
  auto* smcCmd = app.add_subcommand("track-smc", "Sequential Monte Carlo inference");
  std::string smcObsPath, smcOut, smcDiag, smcResample = "every-step";
  HyperCli smcHyper;
  int smcParticles = 100, smcSweepsPerFrame = 3, smcWorkers = 1;
  double smcEssFrac = 0.5;
  std::uint64_t smcSeed = 0;
  smcCmd->add_option("obs", smcObsPath, "Observation JSONL")->required();
  smcCmd->add_option("out", smcOut, "Output MAP state JSON")->required();
  smcCmd->add_option("--particles", smcParticles, "Particle count L");
  smcCmd->add_option("--gibbs-sweeps", smcSweepsPerFrame, "Per-frame Gibbs sweeps S");
  smcCmd->add_option("--resample", smcResample, "every-step | ess-threshold")
      ->check(CLI::IsMember({"every-step", "ess-threshold"}));
  smcCmd->add_option("--ess-fraction", smcEssFrac, "ESS fraction triggering resampling");
  smcCmd->add_option("--seed", smcSeed, "RNG seed");
  smcCmd->add_option("--workers", smcWorkers, "Worker threads (deterministic)");
  smcCmd->add_option("--diagnostics", smcDiag, "Optional diagnostics CSV");
  smcHyper.addFlags(smcCmd);
  smcCmd->callback([&] {
    extract::ExtractionConfig echoCfg;
    int w = 0, h = 0;
    ObservationSet obs = extract::readObservations(smcObsPath, echoCfg, w, h);
    smc::SmcConfig cfg;
    cfg.particles = smcParticles;
    cfg.gibbsSweeps = smcSweepsPerFrame;
    cfg.resampleMode = smcResample == "every-step" ? smc::SmcConfig::Resample::kEveryStep
                                                   : smc::SmcConfig::Resample::kEssThreshold;
    cfg.essFraction = smcEssFrac;
    cfg.seed = smcSeed;
    cfg.workers = smcWorkers;
    cfg.hyper = smcHyper.build(smcCmd, echoCfg.hueBins, echoCfg.L());
    smc::SmcResult res = smc::runSmc(obs, cfg);
    res.map.width = w;
    res.map.height = h;
    res.map.scale = echoCfg.scaleFor(w, h);
    ordered_json header;
    header["tool"] = kVersion;
    header["command"] = "track-smc";
    header["particles"] = cfg.particles;
    header["gibbsSweeps"] = cfg.gibbsSweeps;
    header["resample"] = smcResample;
    header["essFraction"] = cfg.essFraction;
    header["seed"] = cfg.seed;
    header["hyper"] = smcHyper.echo(cfg.hyper);
    writeLatentState(res.map, header.dump(), smcOut);
    if (!smcDiag.empty()) smc::writeDiagnosticsCsv(res.diagnostics, header.dump(), smcDiag);
  });

  // ---- tracks ----
  auto* trCmd = app.add_subcommand("tracks", "Convert a MAP state into object tracks");
  std::string trState, trOut;
  double trConf = 0.5;
  trCmd->add_option("state", trState, "MAP state JSON")->required();
  trCmd->add_option("out", trOut, "Output track JSON")->required();
  trCmd->add_option("--confidence", trConf, "Oval confidence in (0,1)");
  trCmd->callback([&] {
    LatentState st = readLatentState(trState);
    std::vector<tracks::Track> trs = tracks::stateToTracks(st, trConf);
    ordered_json header;
    header["tool"] = kVersion;
    header["command"] = "tracks";
    header["state"] = fs::path(trState).filename().string();
    header["confidence"] = trConf;
    tracks::writeTracks(trs, header.dump(), trOut);
  });

  // ---- eval ----
  auto* evCmd = app.add_subcommand("eval", "Score tracks against ground truth");
  std::string evTracks, evGt, evOut, evCsv;
  evCmd->add_option("tracks", evTracks, "Track JSON")->required();
  evCmd->add_option("gt", evGt, "Ground-truth JSON")->required();
  evCmd->add_option("report", evOut, "Output report JSON")->required();
  evCmd->add_option("--fda-csv", evCsv, "Optional per-frame FDA CSV");
  evCmd->callback([&] {
    std::vector<eval::BoxTrack> det = eval::readTrackBoxes(evTracks);
    eval::GroundTruth gt = eval::readGroundTruth(evGt);
    eval::EvalReport rep = eval::evaluate(gt, det);
    double conf = 0.0;
    {
      std::ifstream in(evTracks);
      json tj;
      in >> tj;
      if (tj.contains("header") && tj["header"].contains("confidence"))
        conf = tj["header"]["confidence"].get<double>();
    }
    ordered_json header;
    header["tool"] = kVersion;
    header["command"] = "eval";
    header["tracks"] = fs::path(evTracks).filename().string();
    header["gt"] = fs::path(evGt).filename().string();
    header["confidence"] = conf;
    eval::writeReport(rep, header.dump(), evOut);
    if (!evCsv.empty()) eval::writeFdaCsv(rep, evCsv);
  });

  // ---- report ----
  auto* repCmd = app.add_subcommand("report", "Render report JSON files as an SVG");
  std::vector<std::string> repInputs;
  repCmd->add_option("reports-and-out", repInputs, "Report JSON files followed by the output SVG")
      ->required()
      ->expected(-1);
  repCmd->callback([&] {
    if (repInputs.size() < 2) throw ConfigError("report: need at least one report and the output path");
    std::string repOut = repInputs.back();
    std::vector<report::ReportInput> ins;
    for (std::size_t i = 0; i + 1 < repInputs.size(); ++i)
      ins.push_back(report::readReportJson(repInputs[i]));
    report::writeSvg(ins, std::string(kVersion) + " report", repOut);
  });

  // ---- sweep-confidence ----
  auto* swCmd = app.add_subcommand("sweep-confidence", "Evaluate a confidence grid");
  std::string swState, swGt, swOut;
  double swLo = 0.05, swHi = 0.95, swStep = 0.05;
  swCmd->add_option("state", swState, "MAP state JSON")->required();
  swCmd->add_option("gt", swGt, "Ground-truth JSON")->required();
  swCmd->add_option("csv", swOut, "Output CSV")->required();
  swCmd->add_option("--lo", swLo, "Lowest confidence");
  swCmd->add_option("--hi", swHi, "Highest confidence");
  swCmd->add_option("--step", swStep, "Grid step");
  swCmd->callback([&] {
    if (swStep <= 0.0 || swLo <= 0.0 || swHi >= 1.0 || swLo > swHi)
      throw ConfigError("sweep-confidence: bad grid");
    LatentState st = readLatentState(swState);
    eval::GroundTruth gt = eval::readGroundTruth(swGt);
    std::ofstream out(swOut);
    if (!out) throw DataError("cannot write csv: " + swOut);
    out << "# " << kVersion << " sweep-confidence state=" << fs::path(swState).filename().string()
        << " gt=" << fs::path(swGt).filename().string() << " lo=" << swLo << " hi=" << swHi
        << " step=" << swStep << "\n";
    out << "confidence,sfda,ata\n";
    for (double c = swLo; c <= swHi + 1e-9; c += swStep) {
      std::vector<tracks::Track> trs = tracks::stateToTracks(st, c);
      eval::EvalReport rep = eval::evaluate(gt, toBoxTracks(trs));
      out << c << "," << rep.sfda << "," << rep.ata << "\n";
    }
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;  // help/version exit clean; bad usage is a config error
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "error code=2 kind=config message=\"" << e.what() << "\"\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "error code=3 kind=data message=\"" << e.what() << "\"\n";
    return 3;
  } catch (const NumericalError& e) {
    std::cerr << "error code=4 kind=numerical message=\"" << e.what() << "\"\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error code=3 kind=data message=\"" << e.what() << "\"\n";
    return 3;
  }
}
