#include "doctest.h"

#include "test_support.hpp"

#include "stochlog/error.hpp"
#include "stochlog/prolog.hpp"
#include "stochlog/reader.hpp"

using namespace stochlog;
using stochlog::testing::load_corpus;

TEST_CASE("digit-sum grammar loads with its two groups") {
    const Program p = load_corpus("digit_sum.sdcg");
    REQUIRE(p.groups().size() == 2);
    const RuleGroup *e = p.group_for(PredicateKey{intern("e"), 1});
    const RuleGroup *n = p.group_for(PredicateKey{intern("n"), 1});
    REQUIRE(e);
    REQUIRE(n);
    CHECK(e->rules.size() == 2);
    CHECK(n->rules.size() == 10);
    for (auto r : e->rules)
        CHECK(p.rules()[r].probability == doctest::Approx(0.5));
    for (auto r : n->rules)
        CHECK(p.rules()[r].probability == doctest::Approx(0.1));
    CHECK(p.min_yield(e->key) == 1);
    CHECK(p.min_yield(n->key) == 1);
    const auto &rec = p.rules()[e->rules[1]];
    REQUIRE(rec.body.size() == 4);
    CHECK(rec.body[1].kind == BodyItem::Kind::Terminals);
    CHECK(rec.body[3].kind == BodyItem::Kind::Goal);
}

TEST_CASE("normalization violations name the group") {
    try {
        Program::parse("0.5 :: e --> [a].\n0.6 :: e --> [b].\n");
        FAIL("expected a normalization error");
    } catch (const ProgramError &e) {
        CHECK(std::string(e.what()).find("e/0") != std::string::npos);
    }
    CHECK_NOTHROW(Program::parse("1/3 :: e --> [a].\n1/3 :: e --> [b].\n1/3 :: e --> [c].\n"));
    CHECK_THROWS_AS(Program::parse("0.33 :: e --> [a].\n0.33 :: e --> [b].\n0.33 :: e --> [c].\n"), ProgramError);
    CHECK_THROWS_AS(Program::parse("1.5 :: e --> [a].\n"), ProgramError);
}

TEST_CASE("addition grammar has one neural rule and one weightless rule") {
    const Program p = load_corpus("addition.sdcg");
    REQUIRE(p.rules().size() == 2);
    const auto &nr = p.rules()[0];
    CHECK(nr.weight_kind == WeightKind::Neural);
    REQUIRE(nr.neural);
    CHECK(symbol_name(nr.neural->model) == "number");
    CHECK(nr.neural->output_size() == 10);
    CHECK(nr.neural->domains[0][3] == Term::integer(3));
    CHECK(p.rules()[1].weight_kind == WeightKind::Unit);
    CHECK(p.groups()[1].kind == GroupKind::Unit);
    CHECK(p.models().size() == 1);
    CHECK(p.model_output_size(intern("number")) == 10);
}

TEST_CASE("neural declarations are validated") {
    const std::string digit = "digit(Y) :- member(Y, [0,1]).\n";
    CHECK_THROWS_WITH_AS(Program::parse(digit + "nn(m, [X], [Z], [digit]) :: n(Y) --> [X].\n"),
                         doctest::Contains("absent"), ProgramError);
    CHECK_THROWS_WITH_AS(Program::parse("nn(m, [X], [Y], [digit]) :: n(Y) --> [X].\n"),
                         doctest::Contains("unknown domain predicate digit/1"), ProgramError);
    CHECK_THROWS_AS(Program::parse(digit + "nn(m, [X], [Y], [digit]) :: n(Y) --> [X].\n0.5 :: n(Y) --> [].\n"),
                    ProgramError);
    CHECK_THROWS_AS(Program::parse(digit + "nn(m, [X], [Y, Z], [digit]) :: n(Y, Z) --> [X].\n"), ProgramError);
}

TEST_CASE("cross-product output domains are flattened row-major") {
    const Program p = Program::parse("two(Y) :- member(Y, [a, b]).\nthree(Y) :- member(Y, [x, y, z]).\n"
                                     "nn(m, [I], [A, B], [two, three]) :: pair(A, B) --> [I].\n");
    const auto &d = *p.rules()[0].neural;
    REQUIRE(d.output_size() == 6);
    CHECK(d.outputs_at(0) == std::vector<Term>{Term::atom("a"), Term::atom("x")});
    CHECK(d.outputs_at(1) == std::vector<Term>{Term::atom("a"), Term::atom("y")});
    CHECK(d.outputs_at(5) == std::vector<Term>{Term::atom("b"), Term::atom("z")});
    CHECK(d.index_of({Term::atom("b"), Term::atom("x")}) == 3u);
    CHECK_FALSE(d.index_of({Term::atom("c"), Term::atom("x")}));
}

TEST_CASE("structural program errors") {
    CHECK_THROWS_WITH_AS(Program::parse("0.5 :: e --> x.\n0.5 :: e --> [a].\n"),
                         doctest::Contains("undefined nonterminal x/0"), ProgramError);
    CHECK_THROWS_WITH_AS(Program::parse("e --> [a].\ne :- true.\n"), doctest::Contains("both"), ProgramError);
    CHECK_THROWS_AS(Program::parse("e --> [a].\ne --> [b].\n"), ProgramError);
    CHECK_THROWS_AS(Program::parse("e --> [a], !.\n"), ProgramError);
    CHECK_THROWS_AS(Program::parse("e --> [a | T].\n"), ProgramError);
    CHECK_THROWS_AS(Program::parse("e --> [a]\n"), ParseError);
    try {
        Program::parse("e --> [a].\n\nf --> g(.\n");
        FAIL("expected a parse error");
    } catch (const ParseError &e) {
        CHECK(std::string(e.what()).rfind("3:", 0) == 0);
    }
}

TEST_CASE("trainable markers make the whole group trainable") {
    const Program p = Program::parse("t :: c --> [a].\n0.2 :: c --> [b].\nt(g) :: d --> [a].\n");
    CHECK(p.groups()[0].kind == GroupKind::Trainable);
    CHECK(p.rules()[1].weight_kind == WeightKind::Trainable);
    CHECK(p.groups()[1].kind == GroupKind::Trainable);
}

TEST_CASE("empty productions and min-yield") {
    const Program p = load_corpus("empty_productions.sdcg");
    CHECK(p.min_yield(PredicateKey{intern("number"), 2}) == 0);
    CHECK(p.min_yield(PredicateKey{intern("addition"), 3}) == 0);
    const Program paren = load_corpus("parentheses.sdcg");
    CHECK(paren.min_yield(PredicateKey{intern("s"), 0}) == 2);
    const Program dead = Program::parse("0.5 :: a --> a.\n0.5 :: a --> a, [x].\n");
    CHECK(dead.min_yield(PredicateKey{intern("a"), 0}) == Program::kUnbounded);
}

TEST_CASE("pretty printing round-trips every corpus grammar") {
    for (const char *name : {"digit_sum.sdcg", "digit_sum_pcfg.sdcg", "digit_sum_neural.sdcg", "digit_sum_trainable.sdcg",
                             "operator_translation.sdcg", "addition.sdcg", "multi_addition.sdcg",
                             "expressions.sdcg", "parentheses.sdcg", "anbncn.sdcg", "word_algebra.sdcg",
                             "empty_productions.sdcg"}) {
        CAPTURE(name);
        const Program p = load_corpus(name);
        const std::string printed = p.pretty_print();
        const Program q = Program::parse(printed);
        CHECK(q.pretty_print() == printed);
        REQUIRE(q.rules().size() == p.rules().size());
        for (std::size_t i = 0; i < p.rules().size(); ++i) {
            const auto &a = p.rules()[i];
            const auto &b = q.rules()[i];
            CHECK(a.head == b.head);
            CHECK(a.weight_term == b.weight_term);
            CHECK(a.weight_kind == b.weight_kind);
            REQUIRE(a.body.size() == b.body.size());
            for (std::size_t j = 0; j < a.body.size(); ++j) {
                CHECK(a.body[j].kind == b.body[j].kind);
                CHECK(a.body[j].term == b.body[j].term);
            }
        }
        CHECK(q.clauses().all().size() == p.clauses().all().size());
    }
}

TEST_CASE("translation threads difference lists") {
    const Program p = load_corpus("operator_translation.sdcg");
    const auto clauses = translate(p);
    REQUIRE(clauses.size() == 7);
    CHECK(clauses[0].to_string() == "digit(Y) :- member(Y,[0,1,2,3,4,5,6,7,8,9]).");
    CHECK(clauses[2].to_string() == "n(N,[I|A],A) :- nn(mnist,[I],[N]), digit(N).");
    CHECK(clauses[3].to_string() == "o(N,[I|A],A) :- nn(operator,[I],[N]), op(N).");
    CHECK(clauses[4].to_string() == "e(N,A,B) :- n(N,A,B), p(1/3).");
    CHECK(clauses[5].to_string() == "e(S,A,D) :- e(E1,A,B), o(+,B,C), n(E2,C,D), S is E1+E2, p(1/3).");
    CHECK(is_variant(clauses[2].as_term(), read_term("n(N,[I|X],X) :- nn(mnist,[I],[N]), digit(N)")));

    const Program single = Program::parse("0.33 :: e(N) --> n(N).\n0.67 :: e(N) --> [x].\n1 :: n(1) --> [y].\n");
    const auto t = translate(single);
    CHECK(t[0].to_string() == "e(N,A,B) :- n(N,A,B), p(0.33).");
    CHECK(t[1].to_string() == "e(N,[x|A],A) :- p(0.67).");

    const Program empty = Program::parse("d(Y) :- member(Y, [1]).\nnn(m, [X], [Y], [d]) :: number(X, Y) --> [].\n");
    CHECK(translate(empty)[1].to_string() == "number(X,Y,A,A) :- nn(m,[X],[Y]), d(Y).");

    const Program mixed = Program::parse("t :: s(X) --> [a], {X = 1}, [b, c], s2.\nt :: s(2) --> [].\ns2 --> [].\n");
    const auto m = translate(mixed);
    CHECK(m[0].to_string() == "s(X,[a,b,c|A],B) :- X=1, s2(A,B), p(t(s/1,0)).");
    CHECK(translate(Program::parse("")).empty());
}

TEST_CASE("translated clauses avoid capturing rule variables") {
    const Program p = Program::parse("r(A, B) --> [A], q(B).\nq(x) --> [].\n");
    const auto t = translate(p);
    CHECK(t[0].to_string() == "r(A,B,[A|C],D) :- q(B,C,D), p(1).");
}

TEST_CASE("prolog solver evaluates builtins and clauses") {
    const Program p = Program::parse("digit(Y) :- member(Y, [0,1,2]).\nsmall(X) :- digit(X), X < 2.\n");
    ScopeCounter scopes;
    PrologSolver solver(p.clauses(), scopes);
    CHECK(solver.all_answers(read_term("small(X)"), {}).size() == 2);
    CHECK(solver.all_answers(read_term("digit(X), X > 0"), {}).size() == 2);

    auto one = solver.solve_single(read_term("N is 2 + 0"), {});
    REQUIRE(one);
    CHECK(one->apply(read_term("N")) == Term::integer(2));

    Substitution in;
    in.bind(VarId{intern("N1"), 0}, Term::integer(1));
    in.bind(VarId{intern("N2"), 0}, Term::integer(2));
    auto half = solver.solve_single(read_term("N2 > 0, N is N1 / N2"), in);
    REQUIRE(half);
    CHECK(half->apply(read_term("N")) == read_term("1r2"));

    Substitution kl;
    kl.bind(VarId{intern("K"), 0}, Term::integer(2));
    kl.bind(VarId{intern("L"), 0}, Term::integer(2));
    CHECK_FALSE(solver.solve_single(read_term("K \\= L"), kl));
    CHECK(solver.solve_single(read_term("K \\= 3 ; L \\= 2"), kl));
    CHECK(solver.solve_single(read_term("\\+ K = 3"), kl));
    CHECK(solver.solve_single(read_term("(K > 5 -> X = big ; X = small)"), kl)->apply(read_term("X")) ==
          Term::atom("small"));

    CHECK_THROWS_AS(solver.all_answers(read_term("X is Y + 1"), {}), EvalError);
    CHECK_THROWS_WITH_AS(solver.all_answers(read_term("nope(1)"), {}), doctest::Contains("nope/1"), EvalError);

    PrologSolver strict(p.clauses(), scopes, PrologOptions{true, 0, true});
    CHECK_THROWS_AS(strict.solve_single(read_term("digit(X)"), {}), EvalError);
    CHECK(strict.solve_single(read_term("digit(1) ; digit(2)"), {}));
}

TEST_CASE("prolog solver depth limit marks truncation") {
    const Program p = Program::parse("nat(z).\nnat(s(X)) :- nat(X).\n");
    ScopeCounter scopes;
    PrologSolver solver(p.clauses(), scopes, PrologOptions{true, 5, false});
    CHECK(solver.all_answers(read_term("nat(X)"), {}).size() == 5);
    CHECK(solver.truncated());
}

TEST_CASE("builtins registered on one solver stay local to it") {
    const Program p = Program::parse("digit(Y) :- member(Y, [0,1,2]).\n");
    ScopeCounter scopes;
    PrologSolver custom(p.clauses(), scopes);
    const PredicateKey key{intern("always"), 0};
    custom.register_builtin(key, [](PrologSolver &, std::span<const Term>, const Substitution &s,
                                    const PrologSolver::Continuation &next) { return next(s); });
    CHECK(custom.is_builtin(key));
    CHECK(custom.all_answers(read_term("always"), {}).size() == 1);
    PrologSolver plain(p.clauses(), scopes);
    CHECK_FALSE(plain.is_builtin(key));
    CHECK(plain.is_builtin(PredicateKey{intern("member"), 2}));
    CHECK(custom.all_answers(read_term("digit(X)"), {}).size() == 3);
}
