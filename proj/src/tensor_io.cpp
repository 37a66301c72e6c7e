#include "vattn/tensor_io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <set>

namespace vattn {

namespace {

constexpr std::uint8_t kMagic[4] = {'V', 'A', 'T', '1'};

class Writer {
public:
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void raw(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        bytes_.insert(bytes_.end(), b, b + n);
    }
    std::vector<std::uint8_t> take() { return std::move(bytes_); }

private:
    std::vector<std::uint8_t> bytes_;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::size_t remaining() const { return bytes_.size() - pos_; }

    void need(std::size_t n, const char* what) const {
        if (remaining() < n) {
            throw Error(ErrorCode::Truncated, std::string("truncated tensor file: missing ") + what +
                                                  " at byte " + std::to_string(pos_));
        }
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t{bytes_[pos_ + i]} << (8 * i);
        pos_ += 4;
        return v;
    }
    std::uint64_t u64(const char* what) {
        need(8, what);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t{bytes_[pos_ + i]} << (8 * i);
        pos_ += 8;
        return v;
    }
    std::string str(std::size_t n, const char* what) {
        need(n, what);
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
        pos_ += n;
        return s;
    }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

std::uint64_t element_count(const std::vector<std::uint64_t>& dims, const std::string& name) {
    std::uint64_t count = 1;
    for (std::uint64_t d : dims) {
        if (d != 0 && count > std::numeric_limits<std::uint64_t>::max() / d) {
            throw Error(ErrorCode::DimOverflow, "dimension product of tensor '" + name + "' overflows");
        }
        count *= d;
    }
    return count;
}

void check_name(const std::string& name) {
    if (name.size() > std::numeric_limits<std::uint32_t>::max()) {
        throw Error(ErrorCode::InvalidArgument, "tensor name too long");
    }
    for (unsigned char c : name) {
        if (c >= 0x80) {
            throw Error(ErrorCode::InvalidArgument, "tensor name '" + name + "' is not ASCII");
        }
    }
}

}  // namespace

std::vector<std::uint8_t> encode_tensors(std::span<const NamedTensor> tensors) {
    std::set<std::string> seen;
    for (const NamedTensor& t : tensors) {
        check_name(t.name);
        if (!seen.insert(t.name).second) {
            throw Error(ErrorCode::InvalidArgument, "duplicate tensor name '" + t.name + "'");
        }
        if (t.dims.size() > std::numeric_limits<std::uint32_t>::max()) {
            throw Error(ErrorCode::InvalidArgument, "too many dimensions");
        }
        if (element_count(t.dims, t.name) != t.data.size()) {
            throw Error(ErrorCode::ShapeMismatch,
                        "tensor '" + t.name + "' holds " + std::to_string(t.data.size()) +
                            " values but its dims describe " +
                            std::to_string(element_count(t.dims, t.name)));
        }
    }
    if (tensors.size() > std::numeric_limits<std::uint32_t>::max()) {
        throw Error(ErrorCode::InvalidArgument, "too many tensors");
    }

    Writer w;
    w.raw(kMagic, sizeof kMagic);
    w.u32(kTensorFormatVersion);
    w.u32(static_cast<std::uint32_t>(tensors.size()));
    for (const NamedTensor& t : tensors) {
        w.u32(static_cast<std::uint32_t>(t.name.size()));
        w.raw(t.name.data(), t.name.size());
        w.u32(static_cast<std::uint32_t>(t.dims.size()));
        for (std::uint64_t d : t.dims) w.u64(d);
        for (float v : t.data) w.f32(v);
    }
    return w.take();
}

std::vector<NamedTensor> decode_tensors(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4 || !std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin())) {
        throw Error(ErrorCode::BadMagic, "not a VAT1 tensor file (bad magic bytes)");
    }
    Reader r(bytes.subspan(4));
    const std::uint32_t version = r.u32("version");
    if (version != kTensorFormatVersion) {
        throw Error(ErrorCode::BadVersion, "unsupported VAT1 version " + std::to_string(version));
    }
    const std::uint32_t count = r.u32("tensor count");
    std::vector<NamedTensor> tensors;
    for (std::uint32_t n = 0; n < count; ++n) {
        NamedTensor t;
        const std::uint32_t name_len = r.u32("name length");
        t.name = r.str(name_len, "name");
        const std::uint32_t ndim = r.u32("ndim");
        r.need(std::size_t{ndim} * 8, "dims");
        t.dims.resize(ndim);
        for (auto& d : t.dims) d = r.u64("dims");
        const std::uint64_t elements = element_count(t.dims, t.name);
        if (elements > std::numeric_limits<std::size_t>::max() / 4) {
            throw Error(ErrorCode::DimOverflow, "tensor '" + t.name + "' is too large to address");
        }
        r.need(static_cast<std::size_t>(elements) * 4, "tensor data");
        t.data.resize(static_cast<std::size_t>(elements));
        for (float& v : t.data) v = std::bit_cast<float>(r.u32("tensor data"));
        tensors.push_back(std::move(t));
    }
    if (r.remaining() != 0) {
        throw Error(ErrorCode::Truncated, std::to_string(r.remaining()) +
                                              " trailing bytes after the declared tensors");
    }
    return tensors;
}

void write_tensors(const std::filesystem::path& path, std::span<const NamedTensor> tensors) {
    const std::vector<std::uint8_t> bytes = encode_tensors(tensors);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::Io, "failed writing '" + path.string() + "'");
}

std::vector<NamedTensor> read_tensors(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_tensors(bytes);
}

NamedTensor tensor_from_matrix(std::string name, const Matrix& m) {
    NamedTensor t{std::move(name), {m.rows(), m.cols()}, {}};
    t.data.reserve(m.data().size());
    for (double v : m.data()) t.data.push_back(static_cast<float>(v));
    return t;
}

Matrix matrix_from_tensor(const NamedTensor& t) {
    if (t.dims.size() != 2) {
        throw Error(ErrorCode::ShapeMismatch, "tensor '" + t.name + "' is " +
                                                  std::to_string(t.dims.size()) + "-D, expected 2-D");
    }
    std::vector<double> data(t.data.begin(), t.data.end());
    return Matrix(static_cast<std::size_t>(t.dims[0]), static_cast<std::size_t>(t.dims[1]),
                  std::move(data));
}

std::vector<NamedTensor> instance_tensors(const AttentionInstance& inst) {
    std::vector<NamedTensor> out;
    out.push_back(tensor_from_matrix("Q", inst.queries()));
    out.push_back(tensor_from_matrix("K", inst.keys()));
    out.push_back(tensor_from_matrix("V", inst.values()));
    out.push_back(NamedTensor{"causal", {1}, {inst.causal() ? 1.0f : 0.0f}});
    return out;
}

AttentionInstance instance_from_tensors(std::span<const NamedTensor> tensors) {
    auto find = [&](const std::string& name) -> const NamedTensor* {
        for (const NamedTensor& t : tensors) {
            if (t.name == name) return &t;
        }
        return nullptr;
    };
    const NamedTensor* q = find("Q");
    const NamedTensor* k = find("K");
    const NamedTensor* v = find("V");
    if (!q || !k || !v) {
        throw Error(ErrorCode::InvalidArgument, "instance file needs tensors named Q, K and V");
    }
    bool causal = false;
    if (const NamedTensor* c = find("causal")) {
        if (c->data.size() != 1) throw Error(ErrorCode::ShapeMismatch, "'causal' must hold one value");
        causal = c->data[0] != 0.0f;
    }
    return AttentionInstance::make(matrix_from_tensor(*q), matrix_from_tensor(*k),
                                   matrix_from_tensor(*v), causal);
}

void write_instance(const std::filesystem::path& path, const AttentionInstance& inst) {
    write_tensors(path, instance_tensors(inst));
}

AttentionInstance read_instance(const std::filesystem::path& path) {
    return instance_from_tensors(read_tensors(path));
}

}  // namespace vattn
