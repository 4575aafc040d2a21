//! Exact differentiation and light-weight simplification.

use super::{Expression, Node};

fn c(v: f64) -> Expression {
    Expression::constant(v)
}

pub fn add(a: Expression, b: Expression) -> Expression {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => c(x + y),
        (Some(0.0), _) => b,
        (_, Some(0.0)) => a,
        _ => Expression::new(Node::Add(a, b)),
    }
}

pub fn sub(a: Expression, b: Expression) -> Expression {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => c(x - y),
        (_, Some(0.0)) => a,
        (Some(0.0), _) => mul(c(-1.0), b),
        _ => Expression::new(Node::Sub(a, b)),
    }
}

pub fn mul(a: Expression, b: Expression) -> Expression {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => c(x * y),
        (Some(0.0), _) | (_, Some(0.0)) => c(0.0),
        (Some(1.0), _) => b,
        (_, Some(1.0)) => a,
        (_, Some(_)) => mul(b, a),
        (Some(x), None) => match b.node() {
            // k * (m * e) -> (k m) * e
            Node::Mul(l, r) if l.as_const().is_some() => mul(c(x * l.as_const().unwrap()), r.clone()),
            _ => Expression::new(Node::Mul(a, b)),
        },
        _ => Expression::new(Node::Mul(a, b)),
    }
}

pub fn div(a: Expression, b: Expression) -> Expression {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) if y != 0.0 => c(x / y),
        (_, Some(1.0)) => a,
        (Some(0.0), _) => c(0.0),
        _ => Expression::new(Node::Div(a, b)),
    }
}

pub fn pow(a: Expression, n: u32) -> Expression {
    match (n, a.as_const()) {
        (0, _) => c(1.0),
        (1, _) => a,
        (_, Some(x)) => c(x.powi(n as i32)),
        _ => Expression::new(Node::Pow(a, n)),
    }
}

fn unary(a: Expression, node: fn(Expression) -> Node, f: fn(f64) -> f64) -> Expression {
    match a.as_const() {
        Some(x) => c(f(x)),
        None => Expression::new(node(a)),
    }
}

impl Expression {
    /// Rebuilds the tree bottom-up with constant folding and 0/1 identities.
    pub fn simplify(&self) -> Expression {
        match self.node() {
            Node::Const(_) | Node::Var(_) => self.clone(),
            Node::Add(a, b) => add(a.simplify(), b.simplify()),
            Node::Sub(a, b) => sub(a.simplify(), b.simplify()),
            Node::Mul(a, b) => mul(a.simplify(), b.simplify()),
            Node::Div(a, b) => div(a.simplify(), b.simplify()),
            Node::Pow(a, n) => pow(a.simplify(), *n),
            Node::Sin(a) => unary(a.simplify(), Node::Sin, f64::sin),
            Node::Cos(a) => unary(a.simplify(), Node::Cos, f64::cos),
            Node::Exp(a) => unary(a.simplify(), Node::Exp, f64::exp),
        }
    }

    /// Exact partial derivative with respect to `x{var}`, simplified.
    pub fn differentiate(&self, var: usize) -> Expression {
        match self.node() {
            Node::Const(_) => c(0.0),
            Node::Var(i) => c(if *i == var { 1.0 } else { 0.0 }),
            Node::Add(a, b) => add(a.differentiate(var), b.differentiate(var)),
            Node::Sub(a, b) => sub(a.differentiate(var), b.differentiate(var)),
            Node::Mul(a, b) => add(
                mul(a.differentiate(var), b.clone()),
                mul(a.clone(), b.differentiate(var)),
            ),
            Node::Div(a, b) => {
                let (da, db) = (a.differentiate(var), b.differentiate(var));
                if db.as_const() == Some(0.0) {
                    return div(da, b.clone());
                }
                div(
                    sub(mul(da, b.clone()), mul(a.clone(), db)),
                    pow(b.clone(), 2),
                )
            }
            Node::Pow(a, n) => match n {
                0 => c(0.0),
                _ => mul(
                    mul(c(f64::from(*n)), pow(a.clone(), n - 1)),
                    a.differentiate(var),
                ),
            },
            Node::Sin(a) => mul(unary(a.clone(), Node::Cos, f64::cos), a.differentiate(var)),
            Node::Cos(a) => mul(
                mul(c(-1.0), unary(a.clone(), Node::Sin, f64::sin)),
                a.differentiate(var),
            ),
            Node::Exp(a) => mul(self.clone(), a.differentiate(var)),
        }
    }
}

#[cfg(test)]
mod tests {
    use crate::expr::parse;

    fn same(a: &str, b: &str, dim: usize) {
        let (ea, eb) = (parse(a, dim).unwrap(), parse(b, dim).unwrap());
        for k in 0..7 {
            let p: Vec<f64> = (0..dim).map(|i| 0.37 * k as f64 - 0.9 + 0.21 * i as f64).collect();
            let (x, y) = (ea.eval(&p).unwrap(), eb.eval(&p).unwrap());
            assert!((x - y).abs() <= 1e-12 * (1.0 + y.abs()), "{a} vs {b} at {p:?}");
        }
    }

    #[test]
    fn power_rule() {
        let d = parse("x0^2", 1).unwrap().differentiate(0);
        assert_eq!(d.to_string(), "2.0 * x0");
    }

    #[test]
    fn circle_partial() {
        let d = parse("x0^2 + x1^2 - 1", 2).unwrap().differentiate(1);
        assert_eq!(d.to_string(), "2.0 * x1");
    }

    #[test]
    fn chain_rule() {
        let d = parse("sin(x0 * x1)", 2).unwrap().differentiate(0);
        same(&d.to_string(), "x1 * cos(x0 * x1)", 2);
    }

    #[test]
    fn quotient_and_exp() {
        let d = parse("exp(x0) / (1 + x0^2)", 1).unwrap().differentiate(0);
        same(
            &d.to_string(),
            "(exp(x0) * (1 + x0^2) - exp(x0) * 2 * x0) / (1 + x0^2)^2",
            1,
        );
        let d = parse("cos(3 * x0)", 1).unwrap().differentiate(0);
        same(&d.to_string(), "-3 * sin(3 * x0)", 1);
    }

    #[test]
    fn simplify_identities() {
        assert_eq!(parse("0*x0 + x1", 2).unwrap().simplify().to_string(), "x1");
        assert_eq!(parse("x0^1", 1).unwrap().simplify().to_string(), "x0");
        assert_eq!(parse("2+3", 1).unwrap().simplify().to_string(), "5.0");
        assert_eq!(parse("x0^0", 1).unwrap().simplify().to_string(), "1.0");
        assert_eq!(parse("(x0 - 0) / 1", 1).unwrap().simplify().to_string(), "x0");
        assert_eq!(parse("2 * (3 * x0)", 1).unwrap().simplify().to_string(), "6.0 * x0");
    }

    #[test]
    fn constant_division_by_zero_is_kept() {
        let e = parse("x0 + 1 / 0", 1).unwrap().simplify();
        assert!(e.eval(&[1.0]).is_err());
    }
}
