#include "convreg/tensor.hpp"

#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace convreg {

ProblemDims::ProblemDims(std::size_t N_, std::size_t k_, std::size_t g_, std::size_t h_)
    : N(N_), k(k_), g(g_), h(h_) {
    if (N == 0 || k == 0 || g == 0 || h == 0)
        throw ShapeError("problem dims: N, k, g and h must be positive");
}

std::ostream& operator<<(std::ostream& os, const ProblemDims& d) {
    return os << "N=" << d.N << " k=" << d.k << " g=" << d.g << " h=" << d.h;
}

KernelTensor one_hot(KernelShape shape, const KernelIndex& idx) {
    KernelTensor kernel(shape);
    if (idx.p < 1 || idx.p > shape.k || idx.q < 1 || idx.q > shape.k || idx.z < 1 ||
        idx.z > shape.g || idx.y < 1 || idx.y > shape.h)
        throw ShapeError("one_hot: index out of range");
    kernel[idx] = 1.0;
    return kernel;
}

KernelTensor identity_center(KernelShape shape) {
    KernelTensor kernel(shape);
    const std::size_t m = (shape.k + 1) / 2;
    for (std::size_t y = 1; y <= shape.h; ++y)
        for (std::size_t z = 1; z <= shape.g; ++z) kernel(m, m, z, y) = 1.0;
    return kernel;
}

KernelTensor descend(const KernelTensor& kernel, const GradientTensor& grad, double lr) {
    if (kernel.shape() != grad.shape()) throw ShapeError("descend: gradient shape differs from kernel");
    KernelTensor next = kernel;
    auto out = next.values();
    auto g = grad.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= lr * g[i];
    return next;
}

namespace {

template <class Tensor>
std::vector<double> flatten(const Tensor& t) {
    auto v = t.values();
    return {v.begin(), v.end()};
}

template <class Tensor>
Tensor unflatten(std::span<const double> v, std::size_t N, std::size_t channels, const char* what) {
    Tensor t(N, channels);
    if (v.size() != t.size()) {
        std::ostringstream msg;
        msg << what << ": vector length " << v.size() << " does not match " << N << "x" << N << "x"
            << channels;
        throw ShapeError(msg.str());
    }
    std::copy(v.begin(), v.end(), t.values().begin());
    return t;
}

void write_values(std::ostream& os, std::span<const double> values, std::size_t per_line) {
    os << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (std::size_t i = 0; i < values.size(); ++i) {
        os << values[i];
        os << ((i + 1) % per_line == 0 || i + 1 == values.size() ? '\n' : ' ');
    }
}

std::vector<std::size_t> read_header(std::istream& is, std::size_t count, const char* what) {
    std::string line;
    if (!std::getline(is, line)) throw FormatError(std::string(what) + ": missing header line");
    std::istringstream hs(line);
    std::vector<std::size_t> out;
    long long value = 0;
    while (hs >> value) {
        if (value <= 0) throw FormatError(std::string(what) + ": header values must be positive");
        out.push_back(static_cast<std::size_t>(value));
    }
    if (!hs.eof() || out.size() != count)
        throw FormatError(std::string(what) + ": expected " + std::to_string(count) +
                          " positive integers on the header line, got '" + line + "'");
    return out;
}

std::vector<double> read_values(std::istream& is, std::size_t count, const char* what) {
    std::vector<double> values;
    values.reserve(count);
    std::string token;
    while (is >> token) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(token, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != token.size())
            throw FormatError(std::string(what) + ": bad value '" + token + "' at position " +
                              std::to_string(values.size() + 1));
        if (!std::isfinite(v))
            throw FormatError(std::string(what) + ": non-finite value at position " +
                              std::to_string(values.size() + 1));
        values.push_back(v);
    }
    if (values.size() != count)
        throw FormatError(std::string(what) + ": expected " + std::to_string(count) + " values, got " +
                          std::to_string(values.size()));
    return values;
}

}  // namespace

std::vector<double> vec_input(const InputTensor& x) { return flatten(x); }
std::vector<double> vec_output(const OutputTensor& y) { return flatten(y); }

InputTensor unvec_input(std::span<const double> v, const ProblemDims& dims) {
    return unflatten<InputTensor>(v, dims.N, dims.g, "unvec_input");
}

OutputTensor unvec_output(std::span<const double> v, const ProblemDims& dims) {
    return unflatten<OutputTensor>(v, dims.N, dims.h, "unvec_output");
}

void write_kernel(std::ostream& os, const KernelTensor& kernel) {
    os << kernel.k() << ' ' << kernel.k() << ' ' << kernel.g() << ' ' << kernel.h() << '\n';
    write_values(os, kernel.values(), kernel.k());
}

KernelTensor read_kernel(std::istream& is) {
    auto header = read_header(is, 4, "kernel file");
    if (header[0] != header[1]) throw FormatError("kernel file: filter must be square (k k g h)");
    KernelShape shape{header[0], header[2], header[3]};
    return KernelTensor(shape, read_values(is, shape.size(), "kernel file"));
}

void save_kernel(const std::string& path, const KernelTensor& kernel) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    write_kernel(out, kernel);
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

KernelTensor load_kernel(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
    try {
        return read_kernel(in);
    } catch (const FormatError& e) {
        throw FormatError(path + ": " + e.what());
    }
}

void write_input(std::ostream& os, const InputTensor& x) {
    os << x.N() << ' ' << x.N() << ' ' << x.channels() << '\n';
    write_values(os, x.values(), x.N());
}

InputTensor read_input(std::istream& is) {
    auto header = read_header(is, 3, "input file");
    if (header[0] != header[1]) throw FormatError("input file: spatial size must be square (N N g)");
    InputTensor x(header[0], header[2]);
    auto values = read_values(is, x.size(), "input file");
    std::copy(values.begin(), values.end(), x.values().begin());
    return x;
}

}  // namespace convreg
