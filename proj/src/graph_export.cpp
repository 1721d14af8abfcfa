#include <cmath>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "statenet/analysis.hpp"

namespace statenet::analysis {

namespace {

std::string dot_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out;
}

std::string fixed(double x, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

}  // namespace

std::string graph_to_json(const TransitionGraph& graph) {
  nlohmann::ordered_json doc;
  doc["nodes"] = nlohmann::ordered_json::array();
  doc["edges"] = nlohmann::ordered_json::array();
  for (const auto& n : graph.nodes)
    doc["nodes"].push_back({{"id", n.id}, {"freq", n.freq}, {"func_frac", n.func_frac}});
  for (const auto& e : graph.edges) {
    nlohmann::ordered_json bigrams = nlohmann::ordered_json::array();
    for (const auto& [w, c] : e.bigrams) bigrams.push_back({w, c});
    doc["edges"].push_back({{"src", e.src}, {"dst", e.dst}, {"count", e.count}, {"bigrams", bigrams}});
  }
  return doc.dump(1) + "\n";
}

TransitionGraph graph_from_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw io::DataError(io::DataError::Kind::Malformed, std::string("graph json: ") + e.what());
  }
  TransitionGraph g;
  try {
    for (const auto& n : doc.at("nodes"))
      g.nodes.push_back({n.at("id").get<std::size_t>(), n.at("freq").get<std::size_t>(), n.at("func_frac").get<double>()});
    for (const auto& e : doc.at("edges")) {
      GraphEdge edge{e.at("src").get<std::size_t>(), e.at("dst").get<std::size_t>(), e.at("count").get<std::size_t>(), {}};
      for (const auto& b : e.at("bigrams")) edge.bigrams.emplace_back(b.at(0).get<std::string>(), b.at(1).get<std::size_t>());
      g.edges.push_back(std::move(edge));
    }
  } catch (const nlohmann::json::exception& e) {
    throw io::DataError(io::DataError::Kind::Malformed, std::string("graph json: ") + e.what());
  }
  return g;
}

std::string graph_to_dot(const TransitionGraph& graph) {
  std::ostringstream out;
  out << "digraph states {\n";
  out << "  node [shape=circle];\n";
  for (const auto& n : graph.nodes) {
    const double width = 0.3 + 0.2 * std::log(1.0 + static_cast<double>(n.freq));
    out << "  s" << n.id << " [label=\"" << n.id << "\", width=" << fixed(width, 3)
        << ", freq=" << n.freq << ", func_frac=" << fixed(n.func_frac, 6) << "];\n";
  }
  for (const auto& e : graph.edges) {
    out << "  s" << e.src << " -> s" << e.dst << " [label=\"" << e.count << "\", weight=" << e.count;
    if (!e.bigrams.empty()) out << ", tooltip=\"" << dot_escape(e.bigrams.front().first) << "\"";
    out << "];\n";
  }
  out << "}\n";
  return out.str();
}

void export_graph(const TransitionGraph& graph, GraphFormat format, const std::string& path) {
  io::write_file(path, format == GraphFormat::Json ? graph_to_json(graph) : graph_to_dot(graph));
}

}  // namespace statenet::analysis
