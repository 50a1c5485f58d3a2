// SPDX-License-Identifier: Apache-2.0
//
// Command-line surface. Every command prints one RunReport JSON document:
// {command, verdict, exit_code, body, timing_ms}.
// Exit codes: 0 success / accepted / all safe, 1 rejected or unknown
// present, 2 I/O or schema errors.

#pragma once

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <future>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nncert/autograd/optim.hpp"
#include "nncert/bounds/crown.hpp"
#include "nncert/bundle/bundle.hpp"
#include "nncert/cert/cert_json.hpp"

namespace nncert {

enum ExitCode { kExitOk = 0, kExitRejected = 1, kExitError = 2 };

struct RunReport {
  std::string command;
  std::string verdict;
  int exit_code = kExitOk;
  json body = json::object();
  double timing_ms = 0.0;

  json to_json() const {
    return json{{"command", command}, {"verdict", verdict}, {"exit_code", exit_code}, {"body", body},
                {"timing_ms", timing_ms}};
  }
};

namespace cli_detail {

using Clock = std::chrono::steady_clock;

inline double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

inline json grid_box(std::span<const double> lo, std::span<const double> hi) {
  std::vector<double> l, h;
  for (double v : lo) l.push_back(fp32_round(v, RoundingMode::toward_neg_inf));
  for (double v : hi) h.push_back(fp32_round(v, RoundingMode::toward_pos_inf));
  return json{{"lo", jio::write_floats(l)}, {"hi", jio::write_floats(h)}, {"lo_decimal", jio::write_decimals(l)},
              {"hi_decimal", jio::write_decimals(h)}};
}

inline json node_box(const Node& n, std::span<const double> lo, std::span<const double> hi) {
  json j = grid_box(lo, hi);
  j["id"] = n.id;
  j["op"] = n.kind.name();
  return j;
}

inline const InputRegion& need_region(const ModelBundle& b) {
  if (!b.region) throw ParseError("bundle.input_region", "command needs an input region");
  return *b.region;
}

inline std::vector<Tensor<double>> read_inputs(const ModelBundle& b, const std::string& file) {
  if (!file.empty()) return load_tensors(jio::read_file(file), file);
  if (b.inputs) return *b.inputs;
  throw ParseError("--input", "no input file given and bundle has no data.inputs");
}

inline RelaxParams read_relax(const std::string& file, const WellTypedGraph& g) {
  RelaxParams r;
  if (file.empty()) return r;
  const json j = jio::parse_text(jio::read_file(file), file);
  auto id_of = [&](const std::string& key, const std::string& path) {
    std::size_t id = 0;
    auto [p, ec] = std::from_chars(key.data(), key.data() + key.size(), id);
    if (ec != std::errc() || p != key.data() + key.size() || id >= g.size() ||
        g.node(id).kind.tag() != OpTag::relu) {
      jio::fail(path, "'" + key + "' is not a relu node id");
    }
    return id;
  };
  if (const auto* a = jio::opt_field(j, "alpha")) {
    for (const auto& [key, v] : a->items()) {
      const auto id = id_of(key, file + ".alpha." + key);
      auto vals = jio::read_floats(v, file + ".alpha." + key);
      if (vals.size() != g.node(id).out_shape.size()) jio::fail(file + ".alpha." + key, "length mismatch");
      r.alpha[id] = std::move(vals);
    }
  }
  if (const auto* bta = jio::opt_field(j, "beta")) {
    for (const auto& [key, v] : bta->items()) {
      const auto id = id_of(key, file + ".beta." + key);
      std::vector<int> vals;
      for (const auto& x : v) vals.push_back(static_cast<int>(jio::read_int(x, file + ".beta." + key)));
      if (vals.size() != g.node(id).out_shape.size()) jio::fail(file + ".beta." + key, "length mismatch");
      r.beta[id] = std::move(vals);
    }
  }
  return r;
}

template <ScalarDomain D>
json domain_tensor(const Tensor<typename D::value_type>& t) {
  json data = json::array(), dec = json::array();
  for (const auto& v : t.data()) {
    if constexpr (std::is_same_v<D, Ieee32Exec>) {
      data.push_back(format_hex32(v.bits()));
      dec.push_back(v.is_nan() ? "nan" : format_fp32_decimal(ieee32::to_real(v)));
    } else if constexpr (std::is_same_v<D, Fp32Rounded>) {
      data.push_back(jio::write_float(v));
      dec.push_back(format_fp32_decimal(v));
    } else {
      data.push_back(v);
    }
  }
  json j{{"shape", jio::write_shape(t.shape())}, {"data", data}};
  if (!dec.empty()) j["data_decimal"] = dec;
  return j;
}

template <ScalarDomain D>
json eval_in(const WellTypedGraph& g, const ModelBundle& b, const std::vector<Tensor<double>>& inputs) {
  const auto ctx = make_context<D>(g, inputs, b.params);
  return domain_tensor<D>(eval_output<D>(g, ctx));
}

/// Lower bound of <c, y> from all objective-dependent passes.
struct ObjectiveBound {
  double backward_ibp;
  double backward_forward_boxes;
  double forward;
  double best() const { return std::max({backward_ibp, backward_forward_boxes, forward}); }
};

inline ObjectiveBound objective_bound(const WellTypedGraph& g, const ParamStore<double>& params,
                                      const InputRegion& region, std::span<const double> c, const RelaxParams& relax,
                                      const std::vector<NodeBounds>& fwd) {
  ObjectiveBound ob;
  ob.backward_ibp = crown_backward(g, params, region, c, relax);
  ob.backward_forward_boxes = crown_backward(g, params, region, c, relax, box_list(fwd));
  ob.forward = objective_lower_bound(fwd[g.output_id()], c, FlatBox::from(region));
  return ob;
}

inline RunReport cmd_validate(const std::string& path) {
  const auto b = load_bundle_file(path);
  const auto g = b.validated();
  RunReport r{"validate", "valid", kExitOk};
  r.body = json{{"graph_id", b.graph_id}, {"nodes", g.size()}, {"inputs", g.inputs().size()},
                {"params", b.params.size()}, {"output", g.output_id()},
                {"output_shape", jio::write_shape(g.output().out_shape)}};
  return r;
}

inline RunReport cmd_eval(const std::string& path, const std::string& input, const std::string& domain) {
  const auto b = load_bundle_file(path);
  const auto g = b.validated();
  const auto inputs = read_inputs(b, input);
  RunReport r{"eval", "ok", kExitOk};
  r.body["domain"] = domain;
  try {
    if (domain == "real") r.body["output"] = eval_in<RealRef>(g, b, inputs);
    else if (domain == "fp32") r.body["output"] = eval_in<Fp32Rounded>(g, b, inputs);
    else r.body["output"] = eval_in<Ieee32Exec>(g, b, inputs);
  } catch (const EvalError& e) {
    r.verdict = "eval-error";
    r.exit_code = kExitRejected;
    r.body["error"] = json{{"node", e.node()}, {"cause", e.cause()}};
  }
  return r;
}

inline RunReport cmd_grad(const std::string& path, const std::string& input, const std::string& seed_file) {
  const auto b = load_bundle_file(path);
  const auto g = b.validated();
  const auto inputs = read_inputs(b, input);
  const auto ctx = make_context<RealRef>(g, inputs, b.params);
  Tensor<double> seed;
  if (seed_file.empty()) {
    seed = Tensor<double>::filled(g.output().out_shape, 1.0);
  } else {
    auto ts = load_tensors(jio::read_file(seed_file), seed_file);
    if (ts.size() != 1 || !(ts[0].shape() == g.output().out_shape)) {
      throw ParseError(seed_file, "seed must be one tensor of the output shape " + g.output().out_shape.to_string());
    }
    seed = ts[0];
  }
  const auto cot = vjp<RealRef>(g, ctx, seed);
  RunReport r{"grad", "ok", kExitOk};
  json leaves = json::array();
  const auto ids = g.leaves();
  for (std::size_t k = 0; k < ids.size(); ++k) {
    const Node& n = g.node(ids[k]);
    json e = domain_tensor<RealRef>(cot[k]);
    e["node"] = n.id;
    e["kind"] = n.kind.name();
    if (n.kind.tag() == OpTag::param) e["key"] = n.kind.get<op::Param>().key;
    leaves.push_back(e);
  }
  r.body["cotangents"] = leaves;
  return r;
}

inline RunReport cmd_train(const std::string& path, const std::string& input, int steps, double lr) {
  const auto b = load_bundle_file(path);
  const auto g = b.validated();
  const auto inputs = read_inputs(b, input);
  std::vector<Tensor<ieee32::B32>> in32;
  for (const auto& t : inputs) in32.push_back(to_domain<Ieee32Exec>(t));
  const auto p32 = b.params.map([](const Tensor<double>& t) { return to_domain<Ieee32Exec>(t); });
  RunReport r{"train-demo", "ok", kExitOk};
  try {
    const auto [losses, params] = train_sgd<Ieee32Exec>(g, in32, p32, steps, lr);
    bool decreasing = true;
    for (std::size_t i = 1; i < losses.size(); ++i) decreasing = decreasing && losses[i] < losses[i - 1];
    r.body = json{{"domain", "ieee32"}, {"steps", steps}, {"lr", lr}, {"losses", jio::write_floats(losses)},
                  {"losses_decimal", jio::write_decimals(losses)}, {"monotone_decrease", decreasing},
                  {"initial_over_final", losses.back() > 0 ? json(losses.front() / losses.back()) : json(nullptr)}};
    json ps = json::object();
    for (const auto& [k, t] : params.entries()) ps[k] = domain_tensor<Ieee32Exec>(t);
    r.body["params"] = ps;
    if (!decreasing) {
      r.verdict = "not-decreasing";
      r.exit_code = kExitRejected;
    }
  } catch (const EvalError& e) {
    r.verdict = "eval-error";
    r.exit_code = kExitRejected;
    r.body["error"] = json{{"node", e.node()}, {"cause", e.cause()}};
  }
  return r;
}

inline void property_verdict(RunReport& r, const ModelBundle& b, std::size_t out,
                             const std::function<double(std::span<const double>)>& lower_of) {
  if (!b.property) {
    r.verdict = "ok";
    return;
  }
  const auto v = check_unsat(*b.property, out, lower_of);
  r.verdict = to_string(v);
  r.exit_code = v == UnsatVerdict::safe ? kExitOk : kExitRejected;
}

inline RunReport cmd_ibp(const std::string& path, const std::string& backing) {
  const auto b = load_bundle_file(path);
  const auto g = b.validated();
  const auto& region = need_region(b);
  RunReport r{"ibp", "ok", kExitOk};
  r.body["backing"] = backing;
  std::vector<std::vector<double>> lo, hi;
  if (backing == "b32") {
    const auto boxes = run_ibp<B32Intervals>(g, b.params, region);
    for (const auto& t : boxes) {
      lo.push_back(lower_bounds<B32Intervals>(t));
      hi.push_back(upper_bounds<B32Intervals>(t));
    }
  } else {
    const auto boxes = run_ibp<RealIntervals>(g, b.params, region);
    for (const auto& t : boxes) {
      lo.push_back(lower_bounds<RealIntervals>(t));
      hi.push_back(upper_bounds<RealIntervals>(t));
    }
  }
  json nodes = json::array();
  for (const Node& n : g.nodes()) nodes.push_back(node_box(n, lo[n.id], hi[n.id]));
  r.body["nodes"] = nodes;
  r.body["output"] = grid_box(lo[g.output_id()], hi[g.output_id()]);
  const auto& olo = lo[g.output_id()];
  const auto& ohi = hi[g.output_id()];
  property_verdict(r, b, olo.size(), [&](std::span<const double> c) { return box_lower(c, olo, ohi); });
  return r;
}

inline RunReport cmd_crown(const std::string& path, const std::string& objective_file, const std::string& alpha_file,
                           const std::string& backing, const std::string& cert_out) {
  const auto b = load_bundle_file(path);
  const auto g = b.validated();
  const auto& region = need_region(b);
  const auto relax = read_relax(alpha_file, g);
  std::optional<std::vector<double>> objective;
  if (!objective_file.empty()) {
    const json j = jio::parse_text(jio::read_file(objective_file), objective_file);
    objective = jio::read_floats(jio::field(j, "objective", objective_file), objective_file + ".objective");
    if (objective->size() != g.output().out_shape.size()) throw ParseError(objective_file, "objective length mismatch");
  }
  RunReport r{"crown", "ok", kExitOk};
  r.body["backing"] = backing;
  json nodes = json::array();
  std::function<double(std::span<const double>)> lower_of;
  std::vector<NodeBounds> fwd;
  std::optional<Certificate> cert;
  if (backing == "b32" || !cert_out.empty()) {
    ProduceOptions opt;
    opt.relax = relax;
    cert = produce_certificate(g, b.params, region, b.graph_id, opt);
    if (b.property) {
      Goal goal;
      goal.kind = Goal::Kind::unsat;
      cert->goal = goal;
    }
  }
  if (backing == "b32") {
    for (const Node& n : g.nodes()) nodes.push_back(node_box(n, cert->bounds.at(n.id).lo, cert->bounds.at(n.id).hi));
    const NodePayload out = cert->bounds.at(g.output_id());
    const InputRegion creg = cert->region;
    lower_of = [out, creg](std::span<const double> c) { return certified_objective(out, c, creg); };
  } else {
    fwd = crown_forward(g, b.params, region, relax);
    for (const Node& n : g.nodes()) nodes.push_back(node_box(n, fwd[n.id].lo, fwd[n.id].hi));
    lower_of = [&](std::span<const double> c) { return objective_bound(g, b.params, region, c, relax, fwd).best(); };
  }
  r.body["nodes"] = nodes;
  r.body["output"] = nodes[g.output_id()];
  if (objective) {
    json o{{"lower_bound", lower_of(*objective)}};
    if (backing != "b32") {
      const auto ob = objective_bound(g, b.params, region, *objective, relax, fwd);
      o["backward_ibp_boxes"] = ob.backward_ibp;
      o["backward_forward_boxes"] = ob.backward_forward_boxes;
      o["forward"] = ob.forward;
    }
    r.body["objective"] = o;
  }
  property_verdict(r, b, g.output().out_shape.size(), lower_of);
  if (!cert_out.empty()) {
    jio::write_file(cert_out, save_certificate(*cert));
    r.body["certificate"] = cert_out;
  }
  return r;
}

inline RunReport cmd_check_cert(const std::string& bundle_path, const std::string& cert_path) {
  const auto b = load_bundle_file(bundle_path);
  const auto g = b.validated();
  const auto c = load_certificate(jio::read_file(cert_path), cert_path);
  const auto rep = check_certificate(g, b.params, c, b.graph_id, b.property);
  RunReport r{"check-cert", rep.accepted ? "accepted" : "rejected", rep.accepted ? kExitOk : kExitRejected};
  r.body = report_json(rep);
  return r;
}

struct InstanceResult {
  std::string name;
  std::string verdict;
  std::string error;
  double time_ms = 0.0;
};

inline InstanceResult run_instance(const std::filesystem::path& file, const std::string& method) {
  const auto t0 = Clock::now();
  InstanceResult res{file.filename().string(), "unknown", {}, 0.0};
  try {
    const auto b = load_bundle_file(file.string());
    const auto g = b.validated();
    const auto& region = need_region(b);
    if (!b.property) throw ParseError(file.string(), "instance has no property");
    const auto out = g.output().out_shape.size();
    UnsatVerdict v;
    if (method == "ibp") {
      const auto boxes = run_ibp<RealIntervals>(g, b.params, region);
      const auto lo = lower_bounds<RealIntervals>(boxes[g.output_id()]);
      const auto hi = upper_bounds<RealIntervals>(boxes[g.output_id()]);
      v = check_unsat_box(*b.property, lo, hi);
    } else {
      const auto fwd = crown_forward(g, b.params, region);
      v = check_unsat(*b.property, out, [&](std::span<const double> c) {
        return objective_bound(g, b.params, region, c, {}, fwd).best();
      });
    }
    res.verdict = to_string(v);
  } catch (const std::exception& e) {
    res.verdict = "error";
    res.error = e.what();
  }
  res.time_ms = ms_since(t0);
  return res;
}

inline RunReport cmd_vnn(const std::string& dir, const std::string& method) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw ParseError(dir, "not a directory");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<std::future<InstanceResult>> jobs;
  for (const auto& f : files) jobs.push_back(std::async(std::launch::async, run_instance, f, method));
  std::size_t safe = 0, unknown = 0, errors = 0;
  json inst = json::array();
  for (auto& j : jobs) {
    const auto res = j.get();
    if (res.verdict == "safe") ++safe;
    else if (res.verdict == "unknown") ++unknown;
    else ++errors;
    json e{{"name", res.name}, {"verdict", res.verdict}, {"time_ms", res.time_ms}};
    if (!res.error.empty()) e["error"] = res.error;
    inst.push_back(e);
  }
  RunReport r{"vnn-check", "", kExitOk};
  std::string summary = "safe: " + std::to_string(safe) + ", unknown: " + std::to_string(unknown);
  if (errors) summary += ", error: " + std::to_string(errors);
  r.verdict = summary;
  r.exit_code = errors ? kExitError : (unknown ? kExitRejected : kExitOk);
  r.body = json{{"method", method}, {"instances", inst}, {"safe", safe}, {"unknown", unknown}, {"error", errors},
                {"total", files.size()}, {"summary", summary}};
  return r;
}

}  // namespace cli_detail

/// Runs one CLI invocation; returns the process exit code.
inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  using namespace cli_detail;
  CLI::App app{"nncert: graph evaluation, bound propagation and certificate checking", "nncert"};
  app.require_subcommand(1);
  std::string out_file;
  app.add_option("--out", out_file, "write the report to a file instead of stdout");

  std::string bundle, input, seed, domain = "ieee32", backing = "real", objective, alpha, cert, cert_out, dir;
  std::string method = "crown";
  int steps = 10;
  double lr = 0.2;

  auto* validate = app.add_subcommand("validate", "load and validate a bundle");
  validate->add_option("bundle", bundle)->required();
  auto* eval = app.add_subcommand("eval", "evaluate the graph output");
  eval->add_option("bundle", bundle)->required();
  eval->add_option("--input", input, "tensor file, one tensor per input node");
  eval->add_option("--domain", domain)->check(CLI::IsMember({"real", "fp32", "ieee32"}));
  auto* grad = app.add_subcommand("grad", "reverse-mode cotangents of all inputs and params");
  grad->add_option("bundle", bundle)->required();
  grad->add_option("--input", input);
  grad->add_option("--seed", seed, "tensor file with the output cotangent (default all ones)");
  auto* train = app.add_subcommand("train-demo", "plain SGD under the IEEE32 kernel");
  train->add_option("bundle", bundle)->required();
  train->add_option("--input", input);
  train->add_option("--steps", steps)->check(CLI::NonNegativeNumber);
  train->add_option("--lr", lr);
  auto* ibp = app.add_subcommand("ibp", "interval bound propagation over the bundle region");
  ibp->add_option("bundle", bundle)->required();
  ibp->add_option("--backing", backing)->check(CLI::IsMember({"real", "b32"}));
  auto* crown = app.add_subcommand("crown", "affine bound propagation");
  crown->add_option("bundle", bundle)->required();
  crown->add_option("--objective", objective, "JSON file {\"objective\": [...]}");
  crown->add_option("--alpha", alpha, "JSON file {\"alpha\": {id: [...]}, \"beta\": {id: [...]}}");
  crown->add_option("--backing", backing)->check(CLI::IsMember({"real", "b32"}));
  crown->add_option("--cert-out", cert_out, "write a certificate of the grid bounds");
  auto* check = app.add_subcommand("check-cert", "replay a certificate");
  check->add_option("bundle", bundle)->required();
  check->add_option("cert", cert)->required();
  auto* vnn = app.add_subcommand("vnn-check", "check every bundle in a directory against its property");
  vnn->add_option("dir", dir)->required();
  vnn->add_option("--method", method)->check(CLI::IsMember({"ibp", "crown"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, er;
    const int code = app.exit(e, o, er);
    out << o.str();
    err << er.str();
    return code == 0 ? kExitOk : kExitError;
  }

  const auto t0 = Clock::now();
  RunReport r;
  r.command = app.get_subcommands().front()->get_name();
  try {
    if (*validate) r = cmd_validate(bundle);
    else if (*eval) r = cmd_eval(bundle, input, domain);
    else if (*grad) r = cmd_grad(bundle, input, seed);
    else if (*train) r = cmd_train(bundle, input, steps, lr);
    else if (*ibp) r = cmd_ibp(bundle, backing);
    else if (*crown) r = cmd_crown(bundle, objective, alpha, backing, cert_out);
    else if (*check) r = cmd_check_cert(bundle, cert);
    else r = cmd_vnn(dir, method);
  } catch (const std::exception& e) {
    r.verdict = "error";
    r.exit_code = kExitError;
    r.body = json{{"error", e.what()}};
    err << "error: " << e.what() << "\n";
  }
  r.timing_ms = ms_since(t0);
  const auto text = jio::dump(r.to_json());
  if (out_file.empty()) {
    out << text;
  } else {
    try {
      jio::write_file(out_file, text);
    } catch (const std::exception& e) {
      err << "error: " << e.what() << "\n";
      return kExitError;
    }
  }
  return r.exit_code;
}

}  // namespace nncert
