// Command-line front end for the multiway tensor decomposition library:
// synthetic data generation, decompositions, multiway BSS, linked BSS,
// feature extraction with classification, and (multiway) PLS regression.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "mtd/features.hpp"
#include "mtd/io.hpp"
#include "mtd/linked.hpp"
#include "mtd/mbss.hpp"
#include "mtd/metrics.hpp"
#include "mtd/mpls.hpp"
#include "mtd/synth.hpp"
#include "mtd/tucker.hpp"

namespace fs = std::filesystem;
using namespace mtd;

namespace {

Dims parse_dims(const std::string& s) {
  Dims out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(std::stoll(tok));
  if (out.empty()) throw InvalidArgumentError("empty dimension list");
  return out;
}

std::vector<ConstraintSpec> parse_constraints(const std::string& kinds,
                                              const std::string& penalties, std::size_t modes,
                                              std::uint64_t seed) {
  std::vector<ConstraintSpec> specs;
  std::stringstream ss(kinds);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    ConstraintSpec c;
    c.kind = constraint_from_name(tok);
    c.seed = seed;
    specs.push_back(c);
  }
  if (specs.size() == 1) specs.resize(modes, specs[0]);
  if (specs.size() != modes)
    throw InvalidArgumentError("constraint list must have one entry or one per mode");
  if (!penalties.empty()) {
    std::stringstream ps(penalties);
    std::size_t i = 0;
    while (std::getline(ps, tok, ',') && i < specs.size()) specs[i++].penalty_weight = std::stod(tok);
  }
  return specs;
}

std::vector<std::pair<fs::path, int>> read_corpus_manifest(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw InvalidInputError("cannot open corpus manifest: " + path.string());
  std::vector<std::pair<fs::path, int>> out;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    auto comma = line.rfind(',');
    if (comma == std::string::npos) throw InvalidInputError("bad corpus line: " + line);
    fs::path p = line.substr(0, comma);
    if (p.is_relative()) p = path.parent_path() / p;
    out.emplace_back(p, std::stoi(line.substr(comma + 1)));
  }
  return out;
}

LabeledTensorSet load_corpus(const fs::path& manifest) {
  LabeledTensorSet set;
  for (const auto& [p, label] : read_corpus_manifest(manifest)) {
    set.samples.push_back(read_tensor(p));
    set.labels.push_back(label);
  }
  return set;
}

int run_synth(const std::string& kind, const Dims& dims, const Dims& ranks, Index r,
              double noise, std::uint64_t seed, const fs::path& out) {
  fs::create_directories(out);
  if (kind == "tucker") {
    auto g = synth::random_tucker(dims, ranks, noise, seed);
    write_tensor(out / "tensor.tnsr", g.tensor);
    save_tucker_model(out / "truth", g.truth, "generator", seed);
  } else if (kind == "cp") {
    auto g = synth::random_cp(dims, r, noise, seed);
    write_tensor(out / "tensor.tnsr", g.tensor);
    fs::create_directories(out / "truth");
    for (std::size_t n = 0; n < g.truth.factors.size(); ++n)
      write_matrix(out / "truth" / ("factor_" + std::to_string(n) + ".tnsr"),
                   g.truth.factors[n]);
    write_matrix(out / "truth" / "weights.tnsr", g.truth.weights);
    write_manifest(out / "truth" / "manifest.txt",
                   {{"kind", "cp"}, {"r", std::to_string(r)}, {"seed", std::to_string(seed)}});
  } else if (kind == "ica") {
    auto g = synth::ica_mixtures(r, dims.empty() ? 2000 : dims[0], seed);
    write_matrix(out / "observed.tnsr", g.observed);
    write_matrix(out / "mixing.tnsr", g.mixing);
    write_matrix(out / "sources.tnsr", g.sources);
    write_manifest(out / "manifest.txt",
                   {{"kind", "ica"}, {"sources", std::to_string(r)}, {"seed", std::to_string(seed)}});
  } else if (kind == "corpus") {
    auto g = synth::class_corpus(dims, ranks, 3, 20, 10, noise, seed);
    std::ofstream train(out / "train.csv"), test(out / "test.csv");
    for (std::size_t i = 0; i < g.train.samples.size(); ++i) {
      std::string name = "train_" + std::to_string(i) + ".tnsr";
      write_tensor(out / name, g.train.samples[i]);
      train << name << "," << g.train.labels[i] << "\n";
    }
    for (std::size_t i = 0; i < g.test.samples.size(); ++i) {
      std::string name = "test_" + std::to_string(i) + ".tnsr";
      write_tensor(out / name, g.test.samples[i]);
      test << name << "," << g.test.labels[i] << "\n";
    }
  } else if (kind == "linked") {
    auto g = synth::linked_subjects(3, dims, ranks, r, noise, seed);
    for (std::size_t sub = 0; sub < g.subjects.size(); ++sub)
      write_tensor(out / ("subject_" + std::to_string(sub) + ".tnsr"), g.subjects[sub]);
    Matrixd common(g.common_mode0.front().size(), static_cast<Index>(g.common_mode0.size()));
    for (std::size_t k = 0; k < g.common_mode0.size(); ++k)
      common.col(static_cast<Index>(k)) = g.common_mode0[k];
    write_matrix(out / "common_mode0.tnsr", common);
  } else if (kind == "coupled") {
    auto g = synth::coupled_pls_pair(dims, dims, ranks, ranks, noise, seed);
    write_tensor(out / "x.tnsr", g.x);
    write_tensor(out / "y.tnsr", g.y);
    write_matrix(out / "shared_mode0.tnsr", g.shared_mode0);
  } else {
    throw InvalidArgumentError("unknown synth kind: " + kind);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multiway tensor decompositions"};
  app.require_subcommand(1);

  std::string input, out = "out", algo = "hooi", constraints = "unconstrained";
  std::string penalties, kind = "tucker", method = "unfold", classifier = "knn";
  std::string dims_s, ranks_s, ranks_y_s, shared_s = "0", inputs_s, x_path, y_path, predict_path;
  std::string train_manifest, test_manifest;
  Dims ranks;
  std::uint64_t seed = 0;
  Index r = 2, knn_k = 3, common = 0;
  int max_iters = 200;
  double tol = 1e-8, noise = 0.0, threshold = 0.9;

  auto* synth_cmd = app.add_subcommand("synth", "generate synthetic data with ground truth");
  synth_cmd->add_option("--kind", kind, "tucker|cp|ica|corpus|linked|coupled");
  synth_cmd->add_option("--dims", dims_s, "comma-separated dims");
  synth_cmd->add_option("--ranks", ranks_s, "comma-separated ranks");
  synth_cmd->add_option("--r", r, "rank / source / common-component count");
  synth_cmd->add_option("--noise", noise, "noise sigma");
  synth_cmd->add_option("--seed", seed, "rng seed");
  synth_cmd->add_option("--out", out, "output directory");

  auto* dec = app.add_subcommand("decompose", "tensor decomposition");
  dec->add_option("--algo", algo, "hosvd|hooi|cp|penalized|bod");
  dec->add_option("--input", input)->required();
  dec->add_option("--ranks", ranks_s);
  dec->add_option("--r", r, "cp rank");
  dec->add_option("--constraints", constraints, "per-mode kinds (penalized)");
  dec->add_option("--penalties", penalties, "per-mode penalty weights");
  dec->add_option("--seed", seed);
  dec->add_option("--max-iters", max_iters);
  dec->add_option("--tol", tol);
  dec->add_option("--out", out);

  auto* mbss_cmd = app.add_subcommand("mbss", "multiway blind source separation");
  mbss_cmd->add_option("--input", input)->required();
  mbss_cmd->add_option("--ranks", ranks_s)->required();
  mbss_cmd->add_option("--constraints", constraints);
  mbss_cmd->add_option("--penalties", penalties);
  mbss_cmd->add_option("--method", method, "unfold|refine");
  mbss_cmd->add_option("--seed", seed);
  mbss_cmd->add_option("--out", out);

  auto* linked_cmd = app.add_subcommand("linked", "linked multiway BSS across subjects");
  linked_cmd->add_option("--inputs", inputs_s, "comma-separated tensor files")->required();
  linked_cmd->add_option("--ranks", ranks_s)->required();
  linked_cmd->add_option("--common", common, "common components per mode 0 (others 0)");
  linked_cmd->add_option("--constraints", constraints);
  linked_cmd->add_option("--threshold", threshold);
  linked_cmd->add_option("--seed", seed);
  linked_cmd->add_option("--out", out);

  auto* feat = app.add_subcommand("features", "feature extraction + classification");
  feat->add_option("--train", train_manifest)->required();
  feat->add_option("--test", test_manifest)->required();
  feat->add_option("--ranks", ranks_s)->required();
  feat->add_option("--classifier", classifier, "knn|centroid");
  feat->add_option("--k", knn_k, "neighbor count");
  feat->add_option("--out", out);

  auto* pls = app.add_subcommand("pls", "PLS / multiway PLS regression");
  pls->add_option("--x", x_path)->required();
  pls->add_option("--y", y_path)->required();
  pls->add_option("--components", r, "components (matrix PLS)");
  pls->add_option("--ranks-x", ranks_s, "tensor PLS ranks for x");
  pls->add_option("--ranks-y", ranks_y_s, "tensor PLS ranks for y");
  pls->add_option("--shared", shared_s, "shared modes, default 0");
  pls->add_option("--predict", predict_path, "predictor tensor to run through the model");
  pls->add_option("--out", out);

  // every subcommand accepts an INI defaults file; flags override its values
  for (CLI::App* sub : {synth_cmd, dec, mbss_cmd, linked_cmd, feat, pls})
    sub->set_config("--config");

  CLI11_PARSE(app, argc, argv);

  try {
    fs::path outdir(out);
    if (!ranks_s.empty()) ranks = parse_dims(ranks_s);

    if (synth_cmd->parsed()) {
      Dims dims = dims_s.empty() ? Dims{} : parse_dims(dims_s);
      return run_synth(kind, dims, ranks, r, noise, seed, outdir);
    }

    if (dec->parsed()) {
      Tensord t = read_tensor(input);
      fs::create_directories(outdir);
      if (algo == "hosvd" || algo == "hooi") {
        TuckerModel m = algo == "hosvd" ? hosvd(t, ranks) : hooi(t, ranks, max_iters, tol);
        save_tucker_model(outdir, m, algo, seed);
      } else if (algo == "cp") {
        CPModel m = cp_als(t, r, max_iters, tol, seed);
        save_tucker_model(outdir, cp_to_tucker(m), "cp", seed);
        write_matrix(outdir / "weights.tnsr", m.weights);
        if (!m.warning.empty()) std::cerr << "warning: " << m.warning << "\n";
      } else if (algo == "penalized") {
        auto specs = parse_constraints(constraints, penalties, ranks.size(), seed);
        std::vector<double> alphas;
        for (const auto& s : specs) alphas.push_back(s.penalty_weight);
        TuckerModel m = penalized_tucker(t, ranks, specs, alphas, max_iters, tol);
        save_tucker_model(outdir, m, "penalized", seed);
      } else if (algo == "bod") {
        BodResult b = bod_decompose(t, ranks, max_iters, tol);
        for (std::size_t k = 0; k < b.blocks.size(); ++k) {
          fs::path bd = outdir / ("block_" + std::to_string(k));
          fs::create_directories(bd);
          write_tensor(bd / "core.tnsr", b.blocks[k].core);
          write_matrix(bd / "factor.tnsr", b.blocks[k].factor);
          write_manifest(bd / "manifest.txt",
                         {{"mode", std::to_string(b.blocks[k].mode)}});
        }
        write_manifest(outdir / "manifest.txt",
                       {{"algorithm", "bod"},
                        {"residual", format_double(b.residual)},
                        {"seed", std::to_string(seed)}});
      } else {
        throw InvalidArgumentError("unknown algorithm: " + algo);
      }
      return 0;
    }

    if (mbss_cmd->parsed()) {
      Tensord t = read_tensor(input);
      auto specs = parse_constraints(constraints, penalties, ranks.size(), seed);
      MwbssResult res = method == "refine" ? mwbss_refine(t, ranks, specs)
                                           : mwbss_unfold(t, ranks, specs);
      save_tucker_model(outdir, res.model, "mbss-" + method, seed);
      std::ofstream rep(outdir / "diagnostics.txt", std::ios::binary);
      rep << mwbss_report(res);
      return 0;
    }

    if (linked_cmd->parsed()) {
      std::vector<Tensord> xs;
      std::stringstream ss(inputs_s);
      std::string tok;
      while (std::getline(ss, tok, ',')) xs.push_back(read_tensor(tok));
      auto specs = parse_constraints(constraints, penalties, ranks.size(), seed);
      Dims commons(ranks.size(), 0);
      commons[0] = common;
      LinkedModel lm = linked_decompose(xs, ranks, commons, specs, threshold);
      fs::create_directories(outdir);
      for (std::size_t sub = 0; sub < lm.subject_models.size(); ++sub)
        save_tucker_model(outdir / ("subject_" + std::to_string(sub)),
                          lm.subject_models[sub], "linked", seed);
      std::vector<std::pair<std::string, std::string>> mf;
      mf.emplace_back("subjects", std::to_string(lm.subject_models.size()));
      for (std::size_t n = 0; n < lm.common_counts.size(); ++n) {
        mf.emplace_back("common_mode" + std::to_string(n),
                        std::to_string(lm.common_counts[n]));
        mf.emplace_back("individual_max_corr_mode" + std::to_string(n),
                        format_double(lm.individual_max_corr[n]));
        if (lm.common_bases[n].cols() > 0)
          write_matrix(outdir / ("common_basis_mode" + std::to_string(n) + ".tnsr"),
                       lm.common_bases[n]);
      }
      write_manifest(outdir / "manifest.txt", mf);
      return 0;
    }

    if (feat->parsed()) {
      LabeledTensorSet train = load_corpus(train_manifest);
      LabeledTensorSet test = load_corpus(test_manifest);
      FeatureSet fs_train = extract_train(train, ranks);
      std::vector<Tensord> test_features;
      for (const auto& x : test.samples) test_features.push_back(project_test(x, fs_train.bases));
      std::string warning;
      std::vector<int> pred = classifier == "centroid"
                                  ? classify_centroid(fs_train, test_features, &warning)
                                  : classify_knn(fs_train, test_features, knn_k);
      fs::create_directories(outdir);
      std::ofstream csv(outdir / "predictions.csv", std::ios::binary);
      csv << "index,label,prediction\n";
      int correct = 0;
      std::map<int, std::map<int, int>> confusion;
      for (std::size_t i = 0; i < pred.size(); ++i) {
        csv << i << "," << test.labels[i] << "," << pred[i] << "\n";
        confusion[test.labels[i]][pred[i]]++;
        if (pred[i] == test.labels[i]) ++correct;
      }
      std::ofstream rep(outdir / "report.txt", std::ios::binary);
      double acc = pred.empty() ? 0.0 : static_cast<double>(correct) / pred.size();
      rep << "classifier=" << classifier << "\n";
      rep << "accuracy=" << format_double(acc) << "\n";
      rep << "fit_error=" << format_double(fs_train.fit_error) << "\n";
      if (!warning.empty()) rep << "warning=" << warning << "\n";
      for (const auto& [truth, row] : confusion) {
        int total = 0, hit = 0;
        for (const auto& [p, c] : row) {
          total += c;
          if (p == truth) hit += c;
        }
        rep << "class_" << truth << "_accuracy="
            << format_double(static_cast<double>(hit) / total) << "\n";
      }
      rep << "confusion=";
      for (const auto& [truth, row] : confusion)
        for (const auto& [p, c] : row) rep << truth << ">" << p << ":" << c << ";";
      rep << "\n";
      return 0;
    }

    if (pls->parsed()) {
      Tensord xt = read_tensor(x_path), yt = read_tensor(y_path);
      fs::create_directories(outdir);
      if (xt.order() == 2 && yt.order() == 2 && ranks_s.empty()) {
        PLSModel m = pls_fit(unfold(xt, 0), unfold(yt, 0), r);
        write_matrix(outdir / "directions.tnsr", m.directions);
        write_matrix(outdir / "scores.tnsr", m.scores);
        write_matrix(outdir / "x_loadings.tnsr", m.x_loadings);
        write_matrix(outdir / "y_loadings.tnsr", m.y_loadings);
        write_matrix(outdir / "scaling.tnsr", m.scaling);
        write_manifest(outdir / "manifest.txt",
                       {{"kind", "pls"},
                        {"components", std::to_string(m.components)},
                        {"warning", m.warning}});
        if (!predict_path.empty()) {
          Matrixd yhat = pls_predict(m, unfold(read_tensor(predict_path), 0));
          write_matrix(outdir / "prediction.tnsr", yhat);
          double resid = (yhat - unfold(yt, 0)).norm() / unfold(yt, 0).norm();
          write_manifest(outdir / "prediction.txt", {{"residual", format_double(resid)}});
        }
      } else {
        Dims ranks_y = ranks_y_s.empty() ? ranks : parse_dims(ranks_y_s);
        std::vector<Index> shared;
        for (Index v : parse_dims(shared_s)) shared.push_back(v);
        TensorPLSModel m = tensor_pls_fit(xt, yt, ranks, ranks_y, shared);
        save_tucker_model(outdir / "x_model", m.x_model, "tensor-pls", seed);
        save_tucker_model(outdir / "y_model", m.y_model, "tensor-pls", seed);
        write_matrix(outdir / "linkage.tnsr", m.linkage);
        if (!predict_path.empty()) {
          Tensord yhat = tensor_pls_predict(m, read_tensor(predict_path));
          write_tensor(outdir / "prediction.tnsr", yhat);
          double resid = (yhat.data() - yt.data()).norm() / yt.data().norm();
          write_manifest(outdir / "prediction.txt", {{"residual", format_double(resid)}});
        }
      }
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error=" << e.code() << " " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error=runtime " << e.what() << "\n";
    return 1;
  }
  return 0;
}
