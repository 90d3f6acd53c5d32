#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "attestfl/harness/experiment.hpp"

namespace attestfl {

/// Stable column order. Timing columns come last so that dropping them
/// leaves a deterministic prefix.
inline const std::vector<std::string>& result_columns(bool with_timing = true) {
  static const std::vector<std::string> all = {
      "round",       "acc",          "asr",      "accepted", "rejected",
      "rule",        "selected",     "malicious_accepted",   "report_bytes",
      "train_ms",    "record_ms",    "sign_ms",  "verify_ms"};
  static const std::vector<std::string> fixed(all.begin(), all.end() - 4);
  return with_timing ? all : fixed;
}

namespace detail {

inline void check_metric(const char* what, double v, std::uint32_t round) {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw Error(Errc::kInvalidArgument, std::string(what) + " out of [0,1] in round " +
                                            std::to_string(round));
  }
}

inline std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string join_ids(const std::vector<std::uint32_t>& ids) {
  std::string s;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) s += ';';
    s += std::to_string(ids[i]);
  }
  return s;
}

inline std::string join_rejected(const std::vector<RejectedClient>& rs) {
  std::string s;
  for (std::size_t i = 0; i < rs.size(); ++i) {
    if (i) s += ';';
    s += std::to_string(rs[i].client_id) + ':' + rs[i].reason;
  }
  return s;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  if (s.empty()) return out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline std::uint32_t to_u32(const std::string& s) {
  try {
    std::size_t pos = 0;
    auto v = std::stoul(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return static_cast<std::uint32_t>(v);
  } catch (const std::logic_error&) {
    throw Error(Errc::kInvalidArgument, "bad integer '" + s + "' in results");
  }
}

inline double to_f64(const std::string& s) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::logic_error&) {
    throw Error(Errc::kInvalidArgument, "bad number '" + s + "' in results");
  }
}

}  // namespace detail

inline void write_results_csv(std::ostream& out, const std::vector<RoundRecord>& records,
                              bool with_timing = true) {
  const auto& cols = result_columns(with_timing);
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  for (const auto& r : records) {
    detail::check_metric("acc", r.acc, r.round);
    detail::check_metric("asr", r.asr, r.round);
    out << r.round << ',' << detail::fmt(r.acc) << ',' << detail::fmt(r.asr) << ','
        << detail::join_ids(r.accepted) << ',' << detail::join_rejected(r.rejected) << ','
        << r.rule << ',' << (r.selected ? std::to_string(*r.selected) : "") << ','
        << r.malicious_accepted << ',' << r.report_bytes;
    if (with_timing) {
      out << ',' << detail::fmt(r.train_ms) << ',' << detail::fmt(r.record_ms) << ','
          << detail::fmt(r.sign_ms) << ',' << detail::fmt(r.verify_ms);
    }
    out << '\n';
  }
}

inline std::vector<RoundRecord> read_results_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::kInvalidArgument, "missing header");
  const auto header = detail::split(line, ',');
  const bool timing = header == result_columns(true);
  if (!timing && header != result_columns(false)) {
    throw Error(Errc::kInvalidArgument, "unexpected results header");
  }
  std::vector<RoundRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = detail::split(line, ',');
    f.resize(header.size());
    RoundRecord r;
    r.round = detail::to_u32(f[0]);
    r.acc = detail::to_f64(f[1]);
    r.asr = detail::to_f64(f[2]);
    for (const auto& id : detail::split(f[3], ';')) r.accepted.push_back(detail::to_u32(id));
    for (const auto& item : detail::split(f[4], ';')) {
      const auto colon = item.find(':');
      if (colon == std::string::npos) {
        throw Error(Errc::kInvalidArgument, "bad rejected entry '" + item + "'");
      }
      r.rejected.push_back({detail::to_u32(item.substr(0, colon)), item.substr(colon + 1)});
    }
    r.rule = f[5];
    if (!f[6].empty()) r.selected = detail::to_u32(f[6]);
    r.malicious_accepted = detail::to_u32(f[7]);
    r.report_bytes = detail::to_u32(f[8]);
    if (timing) {
      r.train_ms = detail::to_f64(f[9]);
      r.record_ms = detail::to_f64(f[10]);
      r.sign_ms = detail::to_f64(f[11]);
      r.verify_ms = detail::to_f64(f[12]);
    }
    out.push_back(std::move(r));
  }
  return out;
}

inline nlohmann::json results_to_json(const std::vector<RoundRecord>& records,
                                      bool with_timing = true) {
  auto arr = nlohmann::json::array();
  for (const auto& r : records) {
    detail::check_metric("acc", r.acc, r.round);
    detail::check_metric("asr", r.asr, r.round);
    nlohmann::json j;
    j["round"] = r.round;
    j["acc"] = r.acc;
    j["asr"] = r.asr;
    j["accepted"] = r.accepted;
    auto rej = nlohmann::json::array();
    for (const auto& x : r.rejected) rej.push_back({{"client", x.client_id}, {"reason", x.reason}});
    j["rejected"] = rej;
    j["rule"] = r.rule;
    j["selected"] = r.selected ? nlohmann::json(*r.selected) : nlohmann::json(nullptr);
    j["malicious_accepted"] = r.malicious_accepted;
    j["report_bytes"] = r.report_bytes;
    if (with_timing) {
      j["train_ms"] = r.train_ms;
      j["record_ms"] = r.record_ms;
      j["sign_ms"] = r.sign_ms;
      j["verify_ms"] = r.verify_ms;
    }
    arr.push_back(std::move(j));
  }
  return arr;
}

inline std::vector<RoundRecord> results_from_json(const nlohmann::json& arr) {
  std::vector<RoundRecord> out;
  try {
    for (const auto& j : arr) {
      RoundRecord r;
      r.round = j.at("round").get<std::uint32_t>();
      r.acc = j.at("acc").get<double>();
      r.asr = j.at("asr").get<double>();
      r.accepted = j.at("accepted").get<std::vector<std::uint32_t>>();
      for (const auto& x : j.at("rejected")) {
        r.rejected.push_back({x.at("client").get<std::uint32_t>(),
                              x.at("reason").get<std::string>()});
      }
      r.rule = j.at("rule").get<std::string>();
      if (!j.at("selected").is_null()) r.selected = j.at("selected").get<std::uint32_t>();
      r.malicious_accepted = j.at("malicious_accepted").get<std::size_t>();
      r.report_bytes = j.at("report_bytes").get<std::size_t>();
      if (j.contains("train_ms")) {
        r.train_ms = j.at("train_ms").get<double>();
        r.record_ms = j.at("record_ms").get<double>();
        r.sign_ms = j.at("sign_ms").get<double>();
        r.verify_ms = j.at("verify_ms").get<double>();
      }
      out.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::kInvalidArgument, std::string("results json: ") + e.what());
  }
  return out;
}

inline void emit_results(std::ostream& out, const std::vector<RoundRecord>& records,
                         ResultFormat format, bool with_timing = true) {
  if (format == ResultFormat::kCsv) {
    write_results_csv(out, records, with_timing);
  } else {
    out << results_to_json(records, with_timing).dump(2) << '\n';
  }
}

inline void emit_results(const std::string& path, const std::vector<RoundRecord>& records,
                         ResultFormat format, bool with_timing = true) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::kIo, "cannot write '" + path + "'");
  emit_results(out, records, format, with_timing);
  if (!out) throw Error(Errc::kIo, "write failed for '" + path + "'");
}

inline std::vector<RoundRecord> read_results(std::istream& in, ResultFormat format) {
  if (format == ResultFormat::kCsv) return read_results_csv(in);
  try {
    return results_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::kInvalidArgument, std::string("results json: ") + e.what());
  }
}

}  // namespace attestfl
