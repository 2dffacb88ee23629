#include "msc/tensor_io.hpp"

#include "msc/error.hpp"

#include <bit>
#include <fstream>
#include <iterator>
#include <limits>

namespace msc {

namespace {

constexpr char kMagic[4] = {'M', 'S', 'C', 'T'};

template <class U>
void put_le(std::vector<std::uint8_t>& out, U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

template <class U>
U get_le(const std::uint8_t* p) {
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(p[i]) << (8 * i);
    return v;
}

std::string describe(const std::string& name) { return name.empty() ? std::string("tensor") : "tensor '" + name + "'"; }

} // namespace

const char* dtype_name(DType t) {
    switch (t) {
    case DType::f32: return "f32";
    case DType::f64: return "f64";
    case DType::i64: return "i64";
    }
    throw ValidationError("unsupported dtype");
}

DType dtype_from_name(const std::string& s) {
    if (s == "f32") return DType::f32;
    if (s == "f64") return DType::f64;
    if (s == "i64") return DType::i64;
    throw ValidationError("unsupported dtype '" + s + "'");
}

std::size_t dtype_size(DType t) { return t == DType::f32 ? 4 : 8; }

bool valid_tensor_name(const std::string& name) {
    if (name.empty() || name == "." || name == "..") return false;
    for (char c : name) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' ||
                        c == '.' || c == '-';
        if (!ok) return false;
    }
    return true;
}

DType TensorRecord::dtype() const { return static_cast<DType>(data.index()); }

std::size_t TensorRecord::size() const {
    return std::visit([](const auto& v) { return v.size(); }, data);
}

std::uint64_t TensorRecord::extent_product() const {
    std::uint64_t p = 1;
    for (auto e : dims) {
        if (e != 0 && p > std::numeric_limits<std::uint64_t>::max() / e)
            throw ValidationError(describe(name) + ": dims overflow");
        p *= e;
    }
    return p;
}

void TensorRecord::validate() const {
    if (!name.empty() && !valid_tensor_name(name)) throw ValidationError("invalid tensor name '" + name + "'");
    if (dims.empty()) throw ValidationError(describe(name) + ": dims must be nonempty");
    if (dims.size() > 255) throw ValidationError(describe(name) + ": too many dims");
    if (extent_product() != size()) throw ValidationError("payload size mismatch for " + describe(name));
}

Eigen::MatrixXd TensorRecord::to_matrix() const {
    validate();
    const auto rows = static_cast<Eigen::Index>(dims[0]);
    const auto cols = rows == 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(size()) / rows;
    Eigen::MatrixXd m(rows, cols);
    std::visit(
        [&](const auto& v) {
            for (Eigen::Index i = 0; i < rows; ++i)
                for (Eigen::Index j = 0; j < cols; ++j)
                    m(i, j) = static_cast<double>(v[static_cast<std::size_t>(i * cols + j)]);
        },
        data);
    return m;
}

Eigen::VectorXd TensorRecord::to_vector() const {
    validate();
    Eigen::VectorXd out(static_cast<Eigen::Index>(size()));
    std::visit(
        [&](const auto& v) {
            for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = static_cast<double>(v[i]);
        },
        data);
    return out;
}

std::vector<std::int64_t> TensorRecord::to_i64() const {
    validate();
    if (const auto* v = std::get_if<std::vector<std::int64_t>>(&data)) return *v;
    throw ValidationError(describe(name) + " is not i64");
}

TensorRecord TensorRecord::from_matrix(std::string name, const Eigen::MatrixXd& m, DType dtype) {
    TensorRecord r;
    r.name = std::move(name);
    r.dims = {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())};
    const auto n = static_cast<std::size_t>(m.size());
    auto fill = [&](auto& v) {
        v.resize(n);
        using T = typename std::decay_t<decltype(v)>::value_type;
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j)
                v[static_cast<std::size_t>(i * m.cols() + j)] = static_cast<T>(m(i, j));
    };
    switch (dtype) {
    case DType::f32: { std::vector<float> v; fill(v); r.data = std::move(v); break; }
    case DType::f64: { std::vector<double> v; fill(v); r.data = std::move(v); break; }
    case DType::i64: { std::vector<std::int64_t> v; fill(v); r.data = std::move(v); break; }
    }
    return r;
}

TensorRecord TensorRecord::from_vector(std::string name, const Eigen::VectorXd& v, DType dtype) {
    TensorRecord r = from_matrix(std::move(name), v, dtype);
    r.dims = {static_cast<std::uint64_t>(v.size())};
    return r;
}

TensorRecord TensorRecord::from_i64(std::string name, std::vector<std::int64_t> v, std::vector<std::uint64_t> dims) {
    TensorRecord r;
    r.name = std::move(name);
    r.dims = dims.empty() ? std::vector<std::uint64_t>{v.size()} : std::move(dims);
    r.data = std::move(v);
    return r;
}

std::vector<std::uint8_t> encode_tensor(const TensorRecord& record) {
    record.validate();
    const DType dt = record.dtype();
    std::vector<std::uint8_t> out;
    out.reserve(8 + 8 * record.dims.size() + record.size() * dtype_size(dt));
    out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
    put_le<std::uint16_t>(out, kTensorVersion);
    out.push_back(static_cast<std::uint8_t>(dt));
    out.push_back(static_cast<std::uint8_t>(record.dims.size()));
    for (auto e : record.dims) put_le<std::uint64_t>(out, e);
    std::visit(
        [&](const auto& v) {
            using T = typename std::decay_t<decltype(v)>::value_type;
            for (T x : v) {
                if constexpr (std::is_same_v<T, float>) put_le(out, std::bit_cast<std::uint32_t>(x));
                else if constexpr (std::is_same_v<T, double>) put_le(out, std::bit_cast<std::uint64_t>(x));
                else put_le(out, static_cast<std::uint64_t>(x));
            }
        },
        record.data);
    return out;
}

TensorRecord decode_tensor(const std::vector<std::uint8_t>& bytes, const std::string& name) {
    if (bytes.size() < 4 || !std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin()))
        throw IoError(describe(name) + ": bad magic");
    if (bytes.size() < 8) throw IoError(describe(name) + ": truncated header");
    const auto version = get_le<std::uint16_t>(bytes.data() + 4);
    if (version != kTensorVersion) throw IoError(describe(name) + ": unsupported version " + std::to_string(version));
    const std::uint8_t code = bytes[6];
    if (code > 2) throw IoError(describe(name) + ": unsupported dtype code " + std::to_string(code));
    const std::size_t ndim = bytes[7];
    if (ndim == 0) throw IoError(describe(name) + ": dims must be nonempty");
    if (bytes.size() < 8 + 8 * ndim) throw IoError(describe(name) + ": truncated header");

    TensorRecord r;
    r.name = name;
    for (std::size_t i = 0; i < ndim; ++i) r.dims.push_back(get_le<std::uint64_t>(bytes.data() + 8 + 8 * i));
    const auto dt = static_cast<DType>(code);
    const std::uint64_t count = r.extent_product();
    const std::size_t offset = 8 + 8 * ndim;
    const std::size_t avail = bytes.size() - offset;
    const std::size_t esize = dtype_size(dt);
    if (count > avail / esize) throw IoError(describe(name) + ": truncated payload");
    if (count * esize != avail) throw IoError(describe(name) + ": trailing bytes after payload");

    const std::uint8_t* p = bytes.data() + offset;
    switch (dt) {
    case DType::f32: {
        std::vector<float> v(count);
        for (std::size_t i = 0; i < count; ++i) v[i] = std::bit_cast<float>(get_le<std::uint32_t>(p + 4 * i));
        r.data = std::move(v);
        break;
    }
    case DType::f64: {
        std::vector<double> v(count);
        for (std::size_t i = 0; i < count; ++i) v[i] = std::bit_cast<double>(get_le<std::uint64_t>(p + 8 * i));
        r.data = std::move(v);
        break;
    }
    case DType::i64: {
        std::vector<std::int64_t> v(count);
        for (std::size_t i = 0; i < count; ++i) v[i] = static_cast<std::int64_t>(get_le<std::uint64_t>(p + 8 * i));
        r.data = std::move(v);
        break;
    }
    }
    return r;
}

void write_tensor(const TensorRecord& record, const std::filesystem::path& path) {
    const auto bytes = encode_tensor(record);
    const auto parent = path.parent_path();
    if (!parent.empty() && !std::filesystem::is_directory(parent))
        throw IoError("parent directory does not exist: " + parent.string());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

TensorRecord read_tensor(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_tensor(bytes, path.stem().string());
}

} // namespace msc
