#include "ergodiff/expr.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <unordered_map>
#include <unordered_set>

namespace ergodiff {

namespace {

using Node = Expression::Node;
using NodePtr = Expression::NodePtr;

const char* kind_name(NodeKind k) {
    switch (k) {
    case NodeKind::Constant: return "const";
    case NodeKind::Variable: return "var";
    case NodeKind::Add: return "add";
    case NodeKind::Mul: return "mul";
    case NodeKind::Div: return "div";
    case NodeKind::Pow: return "pow";
    case NodeKind::Exp: return "exp";
    }
    return "?";
}

NodePtr raw_node(NodeKind k, std::vector<NodePtr> kids = {}, double value = 0.0, int var = 0) {
    auto n = std::make_shared<Node>();
    n->kind = k;
    n->value = value;
    n->var_index = var;
    n->kids = std::move(kids);
    return n;
}

NodePtr nconst(double v) { return raw_node(NodeKind::Constant, {}, v); }

NodePtr nvar(int i) {
    if (i < 1)
        throw ParameterError("variable index must be >= 1, got " + std::to_string(i));
    return raw_node(NodeKind::Variable, {}, 0.0, i);
}

bool is_const(const NodePtr& n, double v) {
    return n->kind == NodeKind::Constant && n->value == v;
}

NodePtr nadd(std::vector<NodePtr> terms) {
    std::vector<NodePtr> flat;
    double c = 0.0;
    for (auto& t : terms) {
        if (t->kind == NodeKind::Add) {
            for (const auto& k : t->kids) {
                if (k->kind == NodeKind::Constant)
                    c += k->value;
                else
                    flat.push_back(k);
            }
        } else if (t->kind == NodeKind::Constant) {
            c += t->value;
        } else {
            flat.push_back(std::move(t));
        }
    }
    if (c != 0.0)
        flat.insert(flat.begin(), nconst(c));
    if (flat.empty())
        return nconst(0.0);
    if (flat.size() == 1)
        return flat[0];
    return raw_node(NodeKind::Add, std::move(flat));
}

NodePtr nmul(std::vector<NodePtr> factors) {
    std::vector<NodePtr> flat;
    double c = 1.0;
    for (auto& f : factors) {
        if (f->kind == NodeKind::Mul) {
            for (const auto& k : f->kids) {
                if (k->kind == NodeKind::Constant)
                    c *= k->value;
                else
                    flat.push_back(k);
            }
        } else if (f->kind == NodeKind::Constant) {
            c *= f->value;
        } else {
            flat.push_back(std::move(f));
        }
    }
    if (c == 0.0)
        return nconst(0.0);
    if (c != 1.0)
        flat.insert(flat.begin(), nconst(c));
    if (flat.empty())
        return nconst(1.0);
    if (flat.size() == 1)
        return flat[0];
    return raw_node(NodeKind::Mul, std::move(flat));
}

NodePtr nneg(NodePtr n) { return nmul({nconst(-1.0), std::move(n)}); }

NodePtr nsub(NodePtr a, NodePtr b) { return nadd({std::move(a), nneg(std::move(b))}); }

NodePtr ndiv(NodePtr num, NodePtr den) {
    if (is_const(num, 0.0))
        return nconst(0.0);
    if (is_const(den, 1.0))
        return num;
    if (den->kind == NodeKind::Constant && den->value != 0.0)
        return nmul({nconst(1.0 / den->value), std::move(num)});
    if (num->kind == NodeKind::Constant && den->kind == NodeKind::Constant && den->value != 0.0)
        return nconst(num->value / den->value);
    return raw_node(NodeKind::Div, {std::move(num), std::move(den)});
}

NodePtr npow(NodePtr base, double e) {
    if (e == 0.0)
        return nconst(1.0);
    if (e == 1.0)
        return base;
    if (base->kind == NodeKind::Constant) {
        const double b = base->value;
        if (b > 0.0)
            return nconst(std::pow(b, e));
        if (b == 0.0 && e > 0.0)
            return nconst(0.0);
        // negative base / 0^negative: keep the node so evaluation reports it
    }
    // state space is the open orthant, so collapsing nested powers is safe
    if (base->kind == NodeKind::Pow)
        return npow(base->kids[0], base->value * e);
    return raw_node(NodeKind::Pow, {std::move(base)}, e);
}

NodePtr nexp(NodePtr arg) {
    if (arg->kind == NodeKind::Constant)
        return nconst(std::exp(arg->value));
    return raw_node(NodeKind::Exp, {std::move(arg)});
}

// Internal marker thrown from deep inside evaluation; the public entry
// point converts it into a DomainError with a node path.
struct EvalFault {
    const Node* node;
    const char* what;
};

double eval_rec(const Node* n, std::span<const double> x,
                std::unordered_map<const Node*, double>& cache) {
    if (auto it = cache.find(n); it != cache.end())
        return it->second;
    double r = 0.0;
    switch (n->kind) {
    case NodeKind::Constant:
        r = n->value;
        break;
    case NodeKind::Variable:
        if (n->var_index > static_cast<int>(x.size()))
            throw ParameterError("evaluation point has " + std::to_string(x.size()) +
                                 " coordinates, expression uses x" + std::to_string(n->var_index));
        r = x[n->var_index - 1];
        break;
    case NodeKind::Add:
        for (const auto& k : n->kids)
            r += eval_rec(k.get(), x, cache);
        break;
    case NodeKind::Mul:
        r = 1.0;
        for (const auto& k : n->kids)
            r *= eval_rec(k.get(), x, cache);
        break;
    case NodeKind::Div: {
        const double num = eval_rec(n->kids[0].get(), x, cache);
        const double den = eval_rec(n->kids[1].get(), x, cache);
        if (den == 0.0)
            throw EvalFault{n, "division by zero"};
        r = num / den;
        break;
    }
    case NodeKind::Pow: {
        const double b = eval_rec(n->kids[0].get(), x, cache);
        if (b < 0.0)
            throw EvalFault{n, "negative base of real power"};
        if (b == 0.0 && n->value < 0.0)
            throw EvalFault{n, "zero raised to negative power"};
        r = (b == 0.0 && n->value == 0.0) ? 1.0 : std::pow(b, n->value);
        break;
    }
    case NodeKind::Exp:
        r = std::exp(eval_rec(n->kids[0].get(), x, cache));
        break;
    }
    cache.emplace(n, r);
    return r;
}

bool find_index_path(const Node* cur, const Node* target, std::vector<int>& idx) {
    if (cur == target)
        return true;
    for (std::size_t i = 0; i < cur->kids.size(); ++i) {
        idx.push_back(static_cast<int>(i));
        if (find_index_path(cur->kids[i].get(), target, idx))
            return true;
        idx.pop_back();
    }
    return false;
}

std::string node_path(const Node* root, const Node* target) {
    std::vector<int> idx;
    if (!find_index_path(root, target, idx))
        return kind_name(target->kind);
    std::string out;
    const Node* cur = root;
    for (int i : idx) {
        out += kind_name(cur->kind);
        out += "[" + std::to_string(i) + "].";
        cur = cur->kids[static_cast<std::size_t>(i)].get();
    }
    out += kind_name(cur->kind);
    return out;
}

NodePtr diff_rec(const NodePtr& n, int var,
                 std::unordered_map<const Node*, NodePtr>& cache) {
    if (auto it = cache.find(n.get()); it != cache.end())
        return it->second;
    NodePtr d;
    switch (n->kind) {
    case NodeKind::Constant:
        d = nconst(0.0);
        break;
    case NodeKind::Variable:
        d = nconst(n->var_index == var ? 1.0 : 0.0);
        break;
    case NodeKind::Add: {
        std::vector<NodePtr> kids;
        kids.reserve(n->kids.size());
        for (const auto& k : n->kids)
            kids.push_back(diff_rec(k, var, cache));
        d = nadd(std::move(kids));
        break;
    }
    case NodeKind::Mul: {
        std::vector<NodePtr> terms;
        for (std::size_t j = 0; j < n->kids.size(); ++j) {
            std::vector<NodePtr> factors;
            factors.reserve(n->kids.size());
            for (std::size_t l = 0; l < n->kids.size(); ++l)
                factors.push_back(l == j ? diff_rec(n->kids[j], var, cache) : n->kids[l]);
            terms.push_back(nmul(std::move(factors)));
        }
        d = nadd(std::move(terms));
        break;
    }
    case NodeKind::Div: {
        const auto& u = n->kids[0];
        const auto& v = n->kids[1];
        auto du = diff_rec(u, var, cache);
        auto dv = diff_rec(v, var, cache);
        d = ndiv(nsub(nmul({du, v}), nmul({u, dv})), nmul({v, v}));
        break;
    }
    case NodeKind::Pow: {
        const auto& u = n->kids[0];
        auto du = diff_rec(u, var, cache);
        d = nmul({nconst(n->value), npow(u, n->value - 1.0), std::move(du)});
        break;
    }
    case NodeKind::Exp: {
        auto du = diff_rec(n->kids[0], var, cache);
        d = nmul({n, std::move(du)}); // reuse exp(u) itself
        break;
    }
    }
    cache.emplace(n.get(), d);
    return d;
}

NodePtr simplify_rec(const NodePtr& n, std::unordered_map<const Node*, NodePtr>& cache) {
    if (auto it = cache.find(n.get()); it != cache.end())
        return it->second;
    NodePtr s;
    std::vector<NodePtr> kids;
    kids.reserve(n->kids.size());
    for (const auto& k : n->kids)
        kids.push_back(simplify_rec(k, cache));
    switch (n->kind) {
    case NodeKind::Constant:
    case NodeKind::Variable:
        s = n;
        break;
    case NodeKind::Add:
        s = nadd(std::move(kids));
        break;
    case NodeKind::Mul:
        s = nmul(std::move(kids));
        break;
    case NodeKind::Div:
        s = ndiv(std::move(kids[0]), std::move(kids[1]));
        break;
    case NodeKind::Pow:
        s = npow(std::move(kids[0]), n->value);
        break;
    case NodeKind::Exp:
        s = nexp(std::move(kids[0]));
        break;
    }
    cache.emplace(n.get(), s);
    return s;
}

std::string fmt_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void print_rec(const Node* n, std::string& out) {
    switch (n->kind) {
    case NodeKind::Constant:
        out += fmt_double(n->value);
        break;
    case NodeKind::Variable:
        out += "(var " + std::to_string(n->var_index) + ")";
        break;
    case NodeKind::Add:
    case NodeKind::Mul:
        out += n->kind == NodeKind::Add ? "(add" : "(mul";
        for (const auto& k : n->kids) {
            out += ' ';
            print_rec(k.get(), out);
        }
        out += ')';
        break;
    case NodeKind::Div:
        out += "(div ";
        print_rec(n->kids[0].get(), out);
        out += ' ';
        print_rec(n->kids[1].get(), out);
        out += ')';
        break;
    case NodeKind::Pow:
        out += "(pow ";
        print_rec(n->kids[0].get(), out);
        out += ' ';
        out += fmt_double(n->value);
        out += ')';
        break;
    case NodeKind::Exp:
        out += "(exp ";
        print_rec(n->kids[0].get(), out);
        out += ')';
        break;
    }
}

struct Parser {
    std::string_view text;
    std::size_t pos = 0;

    [[noreturn]] void fail(const std::string& msg) const {
        throw ParseError("expression parse error at offset " + std::to_string(pos) + ": " + msg);
    }

    void skip_ws() {
        while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos])))
            ++pos;
    }

    bool at_end() {
        skip_ws();
        return pos >= text.size();
    }

    char peek() {
        skip_ws();
        if (pos >= text.size())
            fail("unexpected end of input");
        return text[pos];
    }

    void expect(char c) {
        if (peek() != c)
            fail(std::string("expected '") + c + "'");
        ++pos;
    }

    std::string_view atom() {
        skip_ws();
        const std::size_t start = pos;
        while (pos < text.size() && !std::isspace(static_cast<unsigned char>(text[pos])) &&
               text[pos] != '(' && text[pos] != ')')
            ++pos;
        if (pos == start)
            fail("expected an atom");
        return text.substr(start, pos - start);
    }

    double number() {
        auto a = atom();
        double v = 0.0;
        auto res = std::from_chars(a.data(), a.data() + a.size(), v);
        if (res.ec != std::errc{} || res.ptr != a.data() + a.size())
            fail("invalid number '" + std::string(a) + "'");
        return v;
    }

    NodePtr expr() {
        if (peek() != '(')
            return nconst(number());
        expect('(');
        auto head = atom();
        if (head == "var") {
            auto a = atom();
            int idx = 0;
            auto res = std::from_chars(a.data(), a.data() + a.size(), idx);
            if (res.ec != std::errc{} || res.ptr != a.data() + a.size() || idx < 1)
                fail("invalid variable index '" + std::string(a) + "'");
            expect(')');
            return raw_node(NodeKind::Variable, {}, 0.0, idx);
        }
        if (head == "add" || head == "mul") {
            std::vector<NodePtr> kids;
            while (peek() != ')')
                kids.push_back(expr());
            expect(')');
            if (kids.empty())
                fail(std::string(head) + " needs at least one argument");
            return raw_node(head == "add" ? NodeKind::Add : NodeKind::Mul, std::move(kids));
        }
        if (head == "div") {
            auto a = expr();
            auto b = expr();
            expect(')');
            return raw_node(NodeKind::Div, {std::move(a), std::move(b)});
        }
        if (head == "pow") {
            auto base = expr();
            double e = number();
            expect(')');
            return raw_node(NodeKind::Pow, {std::move(base)}, e);
        }
        if (head == "exp") {
            auto a = expr();
            expect(')');
            return raw_node(NodeKind::Exp, {std::move(a)});
        }
        fail("unknown operator '" + std::string(head) + "'");
    }
};

} // namespace

Expression::Expression() : root_(nconst(0.0)) {}

Expression Expression::constant(double v) { return Expression(nconst(v)); }

Expression Expression::variable(int i) { return Expression(nvar(i)); }

Expression Expression::add(std::vector<Expression> terms) {
    std::vector<NodePtr> kids;
    kids.reserve(terms.size());
    for (auto& t : terms)
        kids.push_back(std::move(t.root_));
    return Expression(nadd(std::move(kids)));
}

Expression Expression::mul(std::vector<Expression> factors) {
    std::vector<NodePtr> kids;
    kids.reserve(factors.size());
    for (auto& f : factors)
        kids.push_back(std::move(f.root_));
    return Expression(nmul(std::move(kids)));
}

Expression Expression::div(Expression num, Expression den) {
    return Expression(ndiv(std::move(num.root_), std::move(den.root_)));
}

Expression Expression::pow(Expression base, double e) {
    return Expression(npow(std::move(base.root_), e));
}

Expression Expression::exp(Expression arg) { return Expression(nexp(std::move(arg.root_))); }

double Expression::evaluate(std::span<const double> x) const {
    std::unordered_map<const Node*, double> cache;
    try {
        return eval_rec(root_.get(), x, cache);
    } catch (const EvalFault& f) {
        throw DomainError(f.what, node_path(root_.get(), f.node));
    }
}

Expression Expression::differentiate(int var) const {
    if (var < 1)
        throw ParameterError("derivative index must be >= 1, got " + std::to_string(var));
    std::unordered_map<const Node*, NodePtr> cache;
    return Expression(diff_rec(root_, var, cache));
}

Expression Expression::simplify() const {
    std::unordered_map<const Node*, NodePtr> cache;
    return Expression(simplify_rec(root_, cache));
}

int Expression::max_var_index() const {
    int best = 0;
    std::unordered_set<const Node*> seen;
    std::function<void(const Node*)> walk = [&](const Node* n) {
        if (!seen.insert(n).second)
            return;
        if (n->kind == NodeKind::Variable)
            best = std::max(best, n->var_index);
        for (const auto& k : n->kids)
            walk(k.get());
    };
    walk(root_.get());
    return best;
}

std::size_t Expression::node_count() const {
    std::unordered_set<const Node*> seen;
    std::function<void(const Node*)> walk = [&](const Node* n) {
        if (!seen.insert(n).second)
            return;
        for (const auto& k : n->kids)
            walk(k.get());
    };
    walk(root_.get());
    return seen.size();
}

bool Expression::is_constant() const { return root_->kind == NodeKind::Constant; }

double Expression::constant_value() const {
    if (!is_constant())
        throw ParameterError("expression is not a constant");
    return root_->value;
}

std::string Expression::to_string() const {
    std::string out;
    print_rec(root_.get(), out);
    return out;
}

Expression Expression::parse(std::string_view text) {
    Parser p{text};
    auto root = p.expr();
    if (!p.at_end())
        p.fail("trailing input");
    return Expression(std::move(root));
}

Expression operator+(Expression a, Expression b) { return Expression::add({std::move(a), std::move(b)}); }
Expression operator-(Expression a, Expression b) {
    return Expression::add({std::move(a), Expression::mul({Expression::constant(-1.0), std::move(b)})});
}
Expression operator*(Expression a, Expression b) { return Expression::mul({std::move(a), std::move(b)}); }
Expression operator/(Expression a, Expression b) { return Expression::div(std::move(a), std::move(b)); }
Expression operator-(Expression a) {
    return Expression::mul({Expression::constant(-1.0), std::move(a)});
}
Expression operator+(double a, Expression b) { return Expression::constant(a) + std::move(b); }
Expression operator+(Expression a, double b) { return std::move(a) + Expression::constant(b); }
Expression operator-(double a, Expression b) { return Expression::constant(a) - std::move(b); }
Expression operator-(Expression a, double b) { return std::move(a) - Expression::constant(b); }
Expression operator*(double a, Expression b) { return Expression::constant(a) * std::move(b); }
Expression operator*(Expression a, double b) { return std::move(a) * Expression::constant(b); }
Expression operator/(double a, Expression b) { return Expression::constant(a) / std::move(b); }
Expression operator/(Expression a, double b) { return std::move(a) / Expression::constant(b); }

CompiledExpression::CompiledExpression(const Expression& e) {
    std::unordered_map<const Node*, std::int32_t> memo;
    std::int32_t next = 0;

    std::function<std::int32_t(const NodePtr&)> visit = [&](const NodePtr& n) -> std::int32_t {
        if (auto it = memo.find(n.get()); it != memo.end())
            return it->second;
        std::int32_t out = -1;
        switch (n->kind) {
        case NodeKind::Constant:
            out = next++;
            steps_.push_back({Op::Const, out, 0, 0, n->value});
            break;
        case NodeKind::Variable:
            out = next++;
            steps_.push_back({Op::Var, out, n->var_index - 1, 0, 0.0});
            break;
        case NodeKind::Add:
        case NodeKind::Mul: {
            const Op op = n->kind == NodeKind::Add ? Op::Add : Op::Mul;
            std::int32_t acc = visit(n->kids[0]);
            for (std::size_t j = 1; j < n->kids.size(); ++j) {
                const std::int32_t rhs = visit(n->kids[j]);
                const std::int32_t dst = next++;
                steps_.push_back({op, dst, acc, rhs, 0.0});
                acc = dst;
            }
            out = acc;
            break;
        }
        case NodeKind::Div: {
            const std::int32_t a = visit(n->kids[0]);
            const std::int32_t b = visit(n->kids[1]);
            out = next++;
            steps_.push_back({Op::Div, out, a, b, 0.0});
            break;
        }
        case NodeKind::Pow: {
            const std::int32_t a = visit(n->kids[0]);
            out = next++;
            if (n->value == 0.5)
                steps_.push_back({Op::Sqrt, out, a, 0, 0.0});
            else if (n->value == 2.0)
                steps_.push_back({Op::Square, out, a, 0, 0.0});
            else if (n->value == -1.0)
                steps_.push_back({Op::Recip, out, a, 0, 0.0});
            else if (n->value == -0.5)
                steps_.push_back({Op::RecipSqrt, out, a, 0, 0.0});
            else
                steps_.push_back({Op::PowGeneral, out, a, 0, n->value});
            break;
        }
        case NodeKind::Exp: {
            const std::int32_t a = visit(n->kids[0]);
            out = next++;
            steps_.push_back({Op::Exp, out, a, 0, 0.0});
            break;
        }
        }
        memo.emplace(n.get(), out);
        return out;
    };

    result_slot_ = visit(e.root());
    slots_ = static_cast<std::size_t>(next);
}

double CompiledExpression::operator()(std::span<const double> x,
                                      std::vector<double>& scratch) const {
    if (scratch.size() < slots_)
        scratch.resize(slots_);
    double* s = scratch.data();
    for (const Step& st : steps_) {
        switch (st.op) {
        case Op::Const: s[st.dst] = st.c; break;
        case Op::Var: s[st.dst] = x[static_cast<std::size_t>(st.a)]; break;
        case Op::Add: s[st.dst] = s[st.a] + s[st.b]; break;
        case Op::Mul: s[st.dst] = s[st.a] * s[st.b]; break;
        case Op::Div: s[st.dst] = s[st.a] / s[st.b]; break;
        case Op::PowGeneral: s[st.dst] = std::pow(s[st.a], st.c); break;
        case Op::Sqrt: s[st.dst] = std::sqrt(s[st.a]); break;
        case Op::Square: s[st.dst] = s[st.a] * s[st.a]; break;
        case Op::Recip: s[st.dst] = 1.0 / s[st.a]; break;
        case Op::RecipSqrt: s[st.dst] = 1.0 / std::sqrt(s[st.a]); break;
        case Op::Exp: s[st.dst] = std::exp(s[st.a]); break;
        }
    }
    return s[result_slot_];
}

} // namespace ergodiff
