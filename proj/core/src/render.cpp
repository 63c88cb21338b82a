#include "plml/render.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <png.h>

#include "plml/csv.hpp"

namespace plml {

namespace {

constexpr char kDiscreteHeader[] =
    "L,kappa,CL,gamma,sigma,mu_star,a,b,delta,r_msgd,rho_sgd,r_sgd,"
    "diff,scaled_diff,winner";
constexpr char kSdeHeader[] = "L,CL,sigma,b_star,mu_star,m_msgd,m_sgd";

struct HeatCell {
  std::optional<double> value;
  bool divergent = false;
};

struct HeatGrid {
  std::size_t nx = 0;
  std::size_t ny = 0;
  std::vector<HeatCell> cells;  // row-major, first csv row top-left
};

struct CurveData {
  std::vector<double> x;
  std::vector<double> msgd;
  std::vector<double> sgd;
};

std::vector<std::vector<std::string>> read_rows(std::istream& in,
                                                std::size_t n_fields,
                                                std::size_t& line_no) {
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != n_fields) {
      throw std::runtime_error("expected " + std::to_string(n_fields) +
                               " fields on line " + std::to_string(line_no));
    }
    rows.push_back(std::move(fields));
  }
  if (rows.empty()) {
    throw std::runtime_error("csv has no data rows");
  }
  return rows;
}

HeatGrid parse_heatmap(std::istream& in, bool scaled) {
  std::size_t line_no = 1;
  auto rows = read_rows(in, 15, line_no);

  // The axis varying fastest is whichever parameter column changes between
  // the first two rows; the grid width is where that column first wraps
  // back to its initial value.
  const std::size_t param_cols[] = {0, 1, 2, 3, 4, 5};
  std::size_t x_col = rows.size();
  if (rows.size() > 1) {
    for (const std::size_t c : param_cols) {
      if (rows[0][c] != rows[1][c]) {
        x_col = c;
        break;
      }
    }
  }
  std::size_t nx = rows.size();
  if (x_col < rows.size()) {
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (rows[i][x_col] == rows[0][x_col]) {
        nx = i;
        break;
      }
    }
  }
  if (nx == 0 || rows.size() % nx != 0) {
    throw std::runtime_error("rows do not form a rectangular grid");
  }

  HeatGrid grid;
  grid.nx = nx;
  grid.ny = rows.size() / nx;
  grid.cells.resize(rows.size());
  const std::size_t value_col = scaled ? 13 : 12;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::size_t row_line = i + 2;
    HeatCell& cell = grid.cells[i];
    const std::string& field = rows[i][value_col];
    if (!field.empty()) {
      cell.value = parse_csv_double(field, row_line);
    }
    cell.divergent = rows[i][14] == "sgd-divergent";
  }
  return grid;
}

CurveData parse_curves(std::istream& in) {
  std::size_t line_no = 1;
  auto rows = read_rows(in, 7, line_no);
  CurveData data;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::size_t row_line = i + 2;
    data.x.push_back(parse_csv_double(rows[i][2], row_line));
    data.msgd.push_back(parse_csv_double(rows[i][5], row_line));
    data.sgd.push_back(parse_csv_double(rows[i][6], row_line));
  }
  return data;
}

using Rgb = std::array<unsigned char, 3>;

constexpr Rgb kGray{153, 153, 153};
constexpr Rgb kHatch{60, 60, 60};
constexpr Rgb kBlue{33, 102, 172};
constexpr Rgb kOrange{230, 120, 20};
constexpr Rgb kFrame{80, 80, 80};

Rgb diverging(double t) {
  t = std::clamp(t, -1.0, 1.0);
  const double a = std::abs(t);
  const Rgb base{247, 247, 247};
  const Rgb target = t >= 0.0 ? Rgb{33, 102, 172} : Rgb{178, 24, 43};
  Rgb out;
  for (int i = 0; i < 3; ++i) {
    out[i] = static_cast<unsigned char>(
        std::lround(base[i] + (target[i] - base[i]) * a));
  }
  return out;
}

struct Canvas {
  std::size_t w = 0;
  std::size_t h = 0;
  std::vector<unsigned char> rgb;

  Canvas(std::size_t width, std::size_t height)
      : w(width), h(height), rgb(3 * width * height, 255) {}

  void set(std::size_t x, std::size_t y, const Rgb& c) {
    if (x >= w || y >= h) return;
    unsigned char* p = &rgb[3 * (y * w + x)];
    p[0] = c[0];
    p[1] = c[1];
    p[2] = c[2];
  }

  void fill(std::size_t x0, std::size_t y0, std::size_t x1, std::size_t y1,
            const Rgb& c) {
    for (std::size_t y = y0; y < y1; ++y) {
      for (std::size_t x = x0; x < x1; ++x) set(x, y, c);
    }
  }

  void blot(long x, long y, const Rgb& c) {
    for (long dy = -1; dy <= 1; ++dy) {
      for (long dx = -1; dx <= 1; ++dx) {
        if (x + dx >= 0 && y + dy >= 0) {
          set(static_cast<std::size_t>(x + dx),
              static_cast<std::size_t>(y + dy), c);
        }
      }
    }
  }

  void line(double x0, double y0, double x1, double y1, const Rgb& c) {
    const double dx = x1 - x0;
    const double dy = y1 - y0;
    const int steps =
        std::max(2, static_cast<int>(std::ceil(std::max(std::abs(dx),
                                                        std::abs(dy)))));
    for (int i = 0; i <= steps; ++i) {
      const double u = static_cast<double>(i) / steps;
      blot(std::lround(x0 + dx * u), std::lround(y0 + dy * u), c);
    }
  }
};

void write_png(const std::string& path, const Canvas& canvas) {
  FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw std::runtime_error("cannot write image file: " + path);
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    if (png) png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw std::runtime_error("png writer initialization failed");
  }
  std::vector<png_bytep> row_ptrs(canvas.h);
  for (std::size_t y = 0; y < canvas.h; ++y) {
    row_ptrs[y] = const_cast<png_bytep>(&canvas.rgb[3 * y * canvas.w]);
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw std::runtime_error("png write failure on " + path);
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(canvas.w),
               static_cast<png_uint_32>(canvas.h), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, row_ptrs.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

std::string svg_color(const Rgb& c) {
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", c[0], c[1], c[2]);
  return buf;
}

void write_text_file(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write image file: " + path);
  out << body;
  out.flush();
  if (!out.good()) throw std::runtime_error("write failure on " + path);
}

RenderInfo render_heatmap(const HeatGrid& grid, const std::string& path,
                          bool png) {
  double vmax = 0.0;
  for (const HeatCell& cell : grid.cells) {
    if (cell.value) vmax = std::max(vmax, std::abs(*cell.value));
  }

  const std::size_t longest = std::max(grid.nx, grid.ny);
  const std::size_t cell_px =
      std::clamp<std::size_t>(512 / std::max<std::size_t>(longest, 1), 4, 32);
  RenderInfo info;
  info.kind = "heatmap";
  info.nx = grid.nx;
  info.ny = grid.ny;
  info.cell_px = cell_px;
  info.width = grid.nx * cell_px;
  info.height = grid.ny * cell_px;

  auto cell_color = [&](const HeatCell& cell) {
    if (!cell.value) return kGray;
    return diverging(vmax > 0.0 ? *cell.value / vmax : 0.0);
  };

  if (png) {
    Canvas canvas(info.width, info.height);
    for (std::size_t iy = 0; iy < grid.ny; ++iy) {
      for (std::size_t ix = 0; ix < grid.nx; ++ix) {
        const HeatCell& cell = grid.cells[iy * grid.nx + ix];
        const Rgb color = cell_color(cell);
        const std::size_t x0 = ix * cell_px;
        const std::size_t y0 = iy * cell_px;
        canvas.fill(x0, y0, x0 + cell_px, y0 + cell_px, color);
        if (cell.divergent) {
          for (std::size_t y = y0; y < y0 + cell_px; ++y) {
            for (std::size_t x = x0; x < x0 + cell_px; ++x) {
              if ((x + y) % 7 == 0) canvas.set(x, y, kHatch);
            }
          }
        }
      }
    }
    write_png(path, canvas);
  } else {
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << info.width
        << "\" height=\"" << info.height << "\" viewBox=\"0 0 " << info.width
        << ' ' << info.height << "\">\n";
    for (std::size_t iy = 0; iy < grid.ny; ++iy) {
      for (std::size_t ix = 0; ix < grid.nx; ++ix) {
        const HeatCell& cell = grid.cells[iy * grid.nx + ix];
        const std::size_t x0 = ix * cell_px;
        const std::size_t y0 = iy * cell_px;
        svg << "<rect x=\"" << x0 << "\" y=\"" << y0 << "\" width=\""
            << cell_px << "\" height=\"" << cell_px << "\" fill=\""
            << svg_color(cell_color(cell)) << "\"/>\n";
        if (cell.divergent) {
          svg << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\""
              << x0 + cell_px << "\" y2=\"" << y0 + cell_px << "\" stroke=\""
              << svg_color(kHatch) << "\" stroke-width=\"1\"/>\n";
          svg << "<line x1=\"" << x0 + cell_px << "\" y1=\"" << y0
              << "\" x2=\"" << x0 << "\" y2=\"" << y0 + cell_px
              << "\" stroke=\"" << svg_color(kHatch)
              << "\" stroke-width=\"1\"/>\n";
        }
      }
    }
    svg << "</svg>\n";
    write_text_file(path, svg.str());
  }
  return info;
}

RenderInfo render_curves(const CurveData& data, const std::string& path,
                         bool png) {
  RenderInfo info;
  info.kind = "curves";
  info.nx = data.x.size();
  info.ny = 2;
  info.width = 640;
  info.height = 480;
  const double margin = 48.0;

  double x_lo = data.x.front();
  double x_hi = data.x.back();
  for (const double v : data.x) {
    x_lo = std::min(x_lo, v);
    x_hi = std::max(x_hi, v);
  }
  double y_lo = data.msgd.front();
  double y_hi = y_lo;
  for (const std::vector<double>* series : {&data.msgd, &data.sgd}) {
    for (const double v : *series) {
      y_lo = std::min(y_lo, v);
      y_hi = std::max(y_hi, v);
    }
  }
  if (x_hi == x_lo) x_hi = x_lo + 1.0;
  if (y_hi == y_lo) y_hi = y_lo + 1.0;
  const double y_pad = 0.05 * (y_hi - y_lo);
  y_lo -= y_pad;
  y_hi += y_pad;

  auto px = [&](double v) {
    return margin + (v - x_lo) / (x_hi - x_lo) * (info.width - 2 * margin);
  };
  auto py = [&](double v) {
    return info.height - margin -
           (v - y_lo) / (y_hi - y_lo) * (info.height - 2 * margin);
  };

  if (png) {
    Canvas canvas(info.width, info.height);
    canvas.line(margin, margin, margin, info.height - margin, kFrame);
    canvas.line(margin, info.height - margin, info.width - margin,
                info.height - margin, kFrame);
    if (y_lo < 0.0 && y_hi > 0.0) {
      canvas.line(margin, py(0.0), info.width - margin, py(0.0),
                  Rgb{200, 200, 200});
    }
    for (const auto& [series, color] :
         {std::pair{&data.msgd, kBlue}, std::pair{&data.sgd, kOrange}}) {
      for (std::size_t i = 0; i + 1 < data.x.size(); ++i) {
        canvas.line(px(data.x[i]), py((*series)[i]), px(data.x[i + 1]),
                    py((*series)[i + 1]), color);
      }
      if (data.x.size() == 1) {
        canvas.blot(std::lround(px(data.x[0])), std::lround(py((*series)[0])),
                    color);
      }
    }
    write_png(path, canvas);
  } else {
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << info.width
        << "\" height=\"" << info.height << "\" viewBox=\"0 0 " << info.width
        << ' ' << info.height << "\">\n";
    svg << "<rect width=\"" << info.width << "\" height=\"" << info.height
        << "\" fill=\"white\"/>\n";
    auto polyline = [&](const std::vector<double>& series, const Rgb& color) {
      svg << "<polyline fill=\"none\" stroke=\"" << svg_color(color)
          << "\" stroke-width=\"2\" points=\"";
      for (std::size_t i = 0; i < data.x.size(); ++i) {
        svg << px(data.x[i]) << ',' << py(series[i]) << ' ';
      }
      svg << "\"/>\n";
    };
    svg << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\""
        << margin << "\" y2=\"" << info.height - margin << "\" stroke=\""
        << svg_color(kFrame) << "\"/>\n";
    svg << "<line x1=\"" << margin << "\" y1=\"" << info.height - margin
        << "\" x2=\"" << info.width - margin << "\" y2=\""
        << info.height - margin << "\" stroke=\"" << svg_color(kFrame)
        << "\"/>\n";
    polyline(data.msgd, kBlue);
    polyline(data.sgd, kOrange);
    svg << "</svg>\n";
    write_text_file(path, svg.str());
  }
  return info;
}

}  // namespace

RenderInfo render_file(const std::string& csv_path,
                       const std::string& image_path, RenderStyle style) {
  bool png = false;
  if (image_path.size() >= 4 &&
      image_path.compare(image_path.size() - 4, 4, ".png") == 0) {
    png = true;
  } else if (image_path.size() >= 4 &&
             image_path.compare(image_path.size() - 4, 4, ".svg") == 0) {
    png = false;
  } else {
    throw std::invalid_argument("unsupported image extension on " + image_path);
  }

  std::ifstream in(csv_path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open csv file: " + csv_path);
  std::string header;
  if (!std::getline(in, header)) {
    throw std::runtime_error("empty csv: " + csv_path);
  }
  if (!header.empty() && header.back() == '\r') header.pop_back();

  if (header == kDiscreteHeader) {
    if (style == RenderStyle::curves) {
      throw std::invalid_argument("curves style needs an sde sweep csv");
    }
    const bool scaled = style == RenderStyle::scaled_diff;
    const HeatGrid grid = parse_heatmap(in, scaled);
    return render_heatmap(grid, image_path, png);
  }
  if (header == kSdeHeader) {
    if (style == RenderStyle::diff || style == RenderStyle::scaled_diff) {
      throw std::invalid_argument("heatmap styles need a discrete sweep csv");
    }
    const CurveData data = parse_curves(in);
    return render_curves(data, image_path, png);
  }
  throw std::runtime_error("unrecognized csv header on line 1: " + header);
}

}  // namespace plml
