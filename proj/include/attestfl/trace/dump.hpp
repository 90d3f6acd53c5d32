#pragma once

#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>

#include "attestfl/trace/events.hpp"
#include "attestfl/trace/sites.hpp"
#include "json.hpp"

namespace attestfl {

/// Parameters carried in the dump header so a trace can be checked offline.
struct TraceDumpHeader {
  std::uint32_t epochs = 0;
  std::uint32_t batches = 0;
  std::uint32_t layers = 0;
};

/// Line-oriented dump: a `# attestfl-trace v<N> epochs=E batches=B
/// layers=L` header, then one `seq kind site target` line per event.
inline void write_trace_dump(std::ostream& out, const ControlFlowTrace& trace,
                             const TraceDumpHeader& header) {
  out << "# attestfl-trace v" << trace.site_table_version
      << " epochs=" << header.epochs << " batches=" << header.batches
      << " layers=" << header.layers << "\n";
  for (const auto& ev : trace.events) {
    out << ev.seq << ' ' << cf_kind_name(ev.kind) << ' ' << ev.site << ' '
        << ev.target << '\n';
  }
}

struct TraceDump {
  ControlFlowTrace trace;
  std::optional<TraceDumpHeader> header;
};

inline TraceDump read_trace_dump(std::istream& in) {
  TraceDump out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') {
      TraceDumpHeader h;
      std::istringstream ss(line.substr(1));
      std::string tok;
      bool any = false;
      while (ss >> tok) {
        auto eq = tok.find('=');
        if (tok.rfind("v", 0) == 0 && eq == std::string::npos && tok.size() > 1) {
          try {
            out.trace.site_table_version =
                static_cast<std::uint32_t>(std::stoul(tok.substr(1)));
          } catch (const std::exception&) {
            throw Error(Errc::kInvalidArgument, "trace dump header: bad version");
          }
          continue;
        }
        if (eq == std::string::npos) continue;
        auto key = tok.substr(0, eq);
        std::uint32_t val = 0;
        try {
          val = static_cast<std::uint32_t>(std::stoul(tok.substr(eq + 1)));
        } catch (const std::exception&) {
          throw Error(Errc::kInvalidArgument, "trace dump header: bad " + key);
        }
        if (key == "epochs") h.epochs = val, any = true;
        if (key == "batches") h.batches = val, any = true;
        if (key == "layers") h.layers = val, any = true;
      }
      if (any) out.header = h;
      continue;
    }
    std::istringstream ss(line);
    std::uint64_t seq = 0, site = 0, target = 0;
    std::string kind;
    if (!(ss >> seq >> kind >> site >> target)) {
      throw Error(Errc::kInvalidArgument,
                  "trace dump line " + std::to_string(line_no) + " malformed");
    }
    CfEvent ev;
    ev.seq = static_cast<std::uint32_t>(seq);
    ev.site = static_cast<SiteId>(site);
    ev.target = static_cast<SiteId>(target);
    if (kind == "call") {
      ev.kind = CfKind::kCall;
    } else if (kind == "return") {
      ev.kind = CfKind::kReturn;
    } else if (kind == "branch") {
      ev.kind = CfKind::kBranch;
    } else {
      throw Error(Errc::kInvalidArgument,
                  "trace dump line " + std::to_string(line_no) +
                      ": unknown kind '" + kind + "'");
    }
    out.trace.events.push_back(ev);
  }
  return out;
}

/// `{"version": N, "sites": [{"id": .., "name": ..}, ...]}`
inline std::string site_table_json(const SiteTable& t) {
  nlohmann::json j;
  j["version"] = t.version;
  j["sites"] = nlohmann::json::array();
  for (const auto& [id, name] : t.sites) {
    j["sites"].push_back({{"id", id}, {"name", name}});
  }
  return j.dump(2);
}

inline SiteTable parse_site_table(const std::string& text) {
  try {
    auto j = nlohmann::json::parse(text);
    SiteTable t;
    t.version = j.at("version").get<std::uint32_t>();
    for (const auto& s : j.at("sites")) {
      t.sites[s.at("id").get<SiteId>()] = s.at("name").get<std::string>();
    }
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::kInvalidArgument, std::string("site table: ") + e.what());
  }
}

}  // namespace attestfl
