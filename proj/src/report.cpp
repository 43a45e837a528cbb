#include "pointlm/report.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace pointlm {

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (const char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (const char c : s) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += '"';
  return out;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::trunc | std::ios::binary);
  if (!f) throw io_error("cannot open '" + path + "' for writing");
  f.write(content.data(), std::streamsize(content.size()));
  if (!f) throw io_error("short write to '" + path + "'");
}

void write_eval_csv(const std::string& path, const EvalReport& rep) {
  std::ostringstream out;
  out << "task,instruction,reference,generated,label_word,correct,bleu1,"
         "rouge_l,similarity\n";
  for (const EvalSampleResult& r : rep.samples) {
    out << csv_escape(r.task) << ',' << csv_escape(r.instruction) << ','
        << csv_escape(r.reference) << ',' << csv_escape(r.generated) << ','
        << csv_escape(r.label_word) << ',' << (r.correct ? 1 : 0) << ','
        << num(r.bleu1) << ',' << num(r.rouge) << ',' << num(r.similarity)
        << '\n';
  }
  write_text_file(path, out.str());
}

void write_kv_csv(const std::string& path,
                  const std::vector<std::pair<std::string, double>>& rows) {
  std::ostringstream out;
  out << "metric,value\n";
  for (const auto& [k, v] : rows) out << csv_escape(k) << ',' << num(v) << '\n';
  write_text_file(path, out.str());
}

void write_sweep_csv(const std::string& path,
                     const std::vector<SweepPoint>& pts) {
  std::ostringstream out;
  out << "resolution_requested,resolution_used,median_tokenize_ms,"
         "clouds_per_second,class_accuracy\n";
  for (const SweepPoint& p : pts)
    out << p.requested << ',' << p.used << ',' << num(p.median_tokenize_ms)
        << ',' << num(p.clouds_per_second) << ',' << num(p.class_accuracy)
        << '\n';
  write_text_file(path, out.str());
}

std::map<std::string, std::vector<double>> read_numeric_csv(
    const std::string& path) {
  std::ifstream f(path);
  if (!f) throw io_error("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(f, line)) throw io_error("'" + path + "': empty file");
  std::vector<std::string> names;
  {
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) names.push_back(cell);
  }
  std::map<std::string, std::vector<double>> cols;
  for (const auto& n : names) cols[n];  // keep empty columns visible
  int line_no = 1;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    // A trailing comma means a final blank cell that getline won't report.
    if (!line.empty() && line.back() == ',') cells.push_back("");
    if (cells.size() != names.size())
      throw io_error("'" + path + "' line " + std::to_string(line_no) + ": " +
                     std::to_string(cells.size()) + " cells, expected " +
                     std::to_string(names.size()));
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (cells[i].empty()) {
        cols[names[i]].push_back(std::numeric_limits<double>::quiet_NaN());
        continue;
      }
      char* end = nullptr;
      const double v = std::strtod(cells[i].c_str(), &end);
      if (end == cells[i].c_str() || *end != '\0')
        throw io_error("'" + path + "' line " + std::to_string(line_no) +
                       ": cell '" + cells[i] + "' is not a number");
      cols[names[i]].push_back(v);
    }
  }
  return cols;
}

std::string svg_line_chart(const std::string& title,
                           const std::string& x_label,
                           const std::string& y_label,
                           const std::vector<ChartSeries>& series) {
  constexpr double kW = 860, kH = 420;
  constexpr double kLeft = 70, kTop = 40, kRight = 170, kBottom = 50;
  const double pw = kW - kLeft - kRight;
  const double ph = kH - kTop - kBottom;
  static const char* kColors[] = {"#3a6ea5", "#d1662f", "#3f8f4e",
                                  "#b0413e", "#7b5ea7", "#708090"};
  constexpr int kNumColors = 6;

  double x0 = 0, x1 = 0, y0 = 0, y1 = 0;
  bool any = false;
  for (const ChartSeries& s : series) {
    require(s.x.size() == s.y.size(),
            "svg_line_chart: series '" + s.name + "' has " +
                std::to_string(s.x.size()) + " x values but " +
                std::to_string(s.y.size()) + " y values");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      if (!any) {
        x0 = x1 = s.x[i];
        y0 = y1 = s.y[i];
        any = true;
      } else {
        x0 = std::min(x0, s.x[i]);
        x1 = std::max(x1, s.x[i]);
        y0 = std::min(y0, s.y[i]);
        y1 = std::max(y1, s.y[i]);
      }
    }
  }
  if (x0 == x1) {
    x0 -= 1;
    x1 += 1;
  }
  if (y0 == y1) {
    const double pad = std::max(1.0, std::abs(y0) * 0.05);
    y0 -= pad;
    y1 += pad;
  } else {
    const double pad = (y1 - y0) * 0.05;
    y0 -= pad;
    y1 += pad;
  }

  const auto px = [&](double x) {
    return kLeft + (x - x0) / (x1 - x0) * pw;
  };
  const auto py = [&](double y) {
    return kTop + ph - (y - y0) / (y1 - y0) * ph;
  };
  const auto coord = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return std::string(buf);
  };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW
      << "\" height=\"" << kH << "\" viewBox=\"0 0 " << kW << " " << kH
      << "\" font-family=\"sans-serif\">\n";
  svg << "<rect width=\"" << kW << "\" height=\"" << kH
      << "\" fill=\"white\"/>\n";
  svg << "<text x=\"" << kW / 2 << "\" y=\"24\" text-anchor=\"middle\" "
         "font-size=\"16\">"
      << xml_escape(title) << "</text>\n";

  // Grid and tick labels.
  constexpr int kTicks = 5;
  for (int i = 0; i <= kTicks; ++i) {
    const double fx = x0 + (x1 - x0) * i / kTicks;
    const double fy = y0 + (y1 - y0) * i / kTicks;
    const double gx = px(fx);
    const double gy = py(fy);
    svg << "<line x1=\"" << coord(gx) << "\" y1=\"" << kTop << "\" x2=\""
        << coord(gx) << "\" y2=\"" << kTop + ph
        << "\" stroke=\"#dddddd\"/>\n";
    svg << "<line x1=\"" << kLeft << "\" y1=\"" << coord(gy) << "\" x2=\""
        << kLeft + pw << "\" y2=\"" << coord(gy)
        << "\" stroke=\"#dddddd\"/>\n";
    svg << "<text x=\"" << coord(gx) << "\" y=\"" << kTop + ph + 18
        << "\" text-anchor=\"middle\" font-size=\"11\">" << num(fx)
        << "</text>\n";
    svg << "<text x=\"" << kLeft - 8 << "\" y=\"" << coord(gy + 4)
        << "\" text-anchor=\"end\" font-size=\"11\">" << num(fy)
        << "</text>\n";
  }
  svg << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw
      << "\" height=\"" << ph << "\" fill=\"none\" stroke=\"#444444\"/>\n";
  svg << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kH - 12
      << "\" text-anchor=\"middle\" font-size=\"13\">" << xml_escape(x_label)
      << "</text>\n";
  svg << "<text x=\"18\" y=\"" << kTop + ph / 2
      << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 "
         "18 "
      << kTop + ph / 2 << ")\">" << xml_escape(y_label) << "</text>\n";

  if (!any)
    svg << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kTop + ph / 2
        << "\" text-anchor=\"middle\" font-size=\"14\" fill=\"#888888\">no "
           "data</text>\n";

  for (std::size_t si = 0; si < series.size(); ++si) {
    const ChartSeries& s = series[si];
    const char* color = kColors[si % kNumColors];
    // Finite runs become polylines; isolated points become dots.
    std::vector<std::pair<double, double>> run;
    const auto flush = [&] {
      if (run.size() >= 2) {
        svg << "<polyline fill=\"none\" stroke=\"" << color
            << "\" stroke-width=\"1.8\" points=\"";
        for (const auto& [x, y] : run) svg << coord(x) << ',' << coord(y) << ' ';
        svg << "\"/>\n";
      } else if (run.size() == 1) {
        svg << "<circle cx=\"" << coord(run[0].first) << "\" cy=\""
            << coord(run[0].second) << "\" r=\"3\" fill=\"" << color
            << "\"/>\n";
      }
      run.clear();
    };
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (std::isfinite(s.x[i]) && std::isfinite(s.y[i]))
        run.emplace_back(px(s.x[i]), py(s.y[i]));
      else
        flush();
    }
    flush();

    const double ly = kTop + 14 + 18.0 * double(si);
    const double lx = kLeft + pw + 12;
    svg << "<line x1=\"" << coord(lx) << "\" y1=\"" << coord(ly - 4)
        << "\" x2=\"" << coord(lx + 22) << "\" y2=\"" << coord(ly - 4)
        << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << coord(lx + 28) << "\" y=\"" << coord(ly)
        << "\" font-size=\"12\">" << xml_escape(s.name) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace pointlm
