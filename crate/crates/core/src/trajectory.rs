use std::fmt::Write as _;
use std::io;

/// The columns carried by a [`Trajectory`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Compartment {
    Susceptible,
    ForceOfInfection,
    Exposed,
    Infected,
    Removed,
    Cumulative,
}

impl Compartment {
    pub const ALL: [Compartment; 6] = [
        Compartment::Susceptible,
        Compartment::ForceOfInfection,
        Compartment::Exposed,
        Compartment::Infected,
        Compartment::Removed,
        Compartment::Cumulative,
    ];

    pub fn column(self) -> &'static str {
        match self {
            Compartment::Susceptible => "S_bar",
            Compartment::ForceOfInfection => "Ifrak_bar",
            Compartment::Exposed => "E_bar",
            Compartment::Infected => "I_bar",
            Compartment::Removed => "R_bar",
            Compartment::Cumulative => "A",
        }
    }
}

/// Time grid plus the scaled compartment values `(S̄, ℑ̄, Ē, Ī, R̄)` and the
/// scaled cumulative number of new infections `Ā`.
///
/// Stochastic runs carry their population size, and their `A` column is
/// written as a count.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub s: Vec<f64>,
    pub ifrak: Vec<f64>,
    pub e: Vec<f64>,
    pub i: Vec<f64>,
    pub r: Vec<f64>,
    pub a: Vec<f64>,
    pub population: Option<u64>,
}

impl Trajectory {
    pub fn with_capacity(n: usize) -> Self {
        Self {
            t: Vec::with_capacity(n),
            s: Vec::with_capacity(n),
            ifrak: Vec::with_capacity(n),
            e: Vec::with_capacity(n),
            i: Vec::with_capacity(n),
            r: Vec::with_capacity(n),
            a: Vec::with_capacity(n),
            population: None,
        }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    #[allow(clippy::too_many_arguments)]
    pub fn push(&mut self, t: f64, s: f64, ifrak: f64, e: f64, i: f64, r: f64, a: f64) {
        self.t.push(t);
        self.s.push(s);
        self.ifrak.push(ifrak);
        self.e.push(e);
        self.i.push(i);
        self.r.push(r);
        self.a.push(a);
    }

    pub fn component(&self, c: Compartment) -> &[f64] {
        match c {
            Compartment::Susceptible => &self.s,
            Compartment::ForceOfInfection => &self.ifrak,
            Compartment::Exposed => &self.e,
            Compartment::Infected => &self.i,
            Compartment::Removed => &self.r,
            Compartment::Cumulative => &self.a,
        }
    }

    /// Linear interpolation of one column at time `t` (clamped to the grid).
    pub fn interpolate(&self, c: Compartment, t: f64) -> f64 {
        let v = self.component(c);
        if self.t.is_empty() {
            return f64::NAN;
        }
        if t <= self.t[0] {
            return v[0];
        }
        let last = self.t.len() - 1;
        if t >= self.t[last] {
            return v[last];
        }
        let k = self.t.partition_point(|&x| x <= t);
        let (t0, t1) = (self.t[k - 1], self.t[k]);
        if t1 == t0 {
            return v[k];
        }
        let w = (t - t0) / (t1 - t0);
        v[k - 1] * (1.0 - w) + v[k] * w
    }

    /// `sup |self − other|` of one column over the points of `self` lying in
    /// `[0, until]`, interpolating `other`.
    pub fn sup_distance(&self, other: &Trajectory, c: Compartment, until: f64) -> f64 {
        let v = self.component(c);
        self.t
            .iter()
            .zip(v)
            .filter(|(t, _)| **t <= until + 1e-9)
            .map(|(t, x)| (x - other.interpolate(c, *t)).abs())
            .fold(0.0, f64::max)
    }

    /// Index and value of the maximum of one column.
    pub fn peak(&self, c: Compartment) -> (usize, f64) {
        self.component(c)
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (k, x)| if x > acc.1 { (k, x) } else { acc })
    }

    /// CSV with header `t,S_bar,Ifrak_bar,E_bar,I_bar,R_bar,A`.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.len() * 96);
        out.push_str("t,S_bar,Ifrak_bar,E_bar,I_bar,R_bar,A\n");
        let scale = self.population.map_or(1.0, |n| n as f64);
        for k in 0..self.len() {
            let a = self.a[k] * scale;
            let a = if self.population.is_some() { a.round() } else { a };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                self.t[k], self.s[k], self.ifrak[k], self.e[k], self.i[k], self.r[k], a
            );
        }
        out
    }

    pub fn write_csv<W: io::Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(self.to_csv().as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolation_and_distance() {
        let mut a = Trajectory::default();
        let mut b = Trajectory::default();
        for k in 0..=10 {
            let t = k as f64 * 0.1;
            a.push(t, 1.0 - t, 0.0, 0.0, t, 0.0, 0.0);
        }
        for k in 0..=2 {
            let t = k as f64 * 0.5;
            b.push(t, 1.0 - t, 0.0, 0.0, t + 0.01, 0.0, 0.0);
        }
        assert!((b.interpolate(Compartment::Infected, 0.25) - 0.26).abs() < 1e-12);
        assert!(a.sup_distance(&b, Compartment::Susceptible, 1.0) < 1e-12);
        assert!((a.sup_distance(&b, Compartment::Infected, 1.0) - 0.01).abs() < 1e-12);
        assert_eq!(a.peak(Compartment::Infected).0, 10);
    }

    #[test]
    fn csv_scales_cumulative_count() {
        let mut a = Trajectory::default();
        a.population = Some(100);
        a.push(0.0, 0.95, 0.1, 0.0, 0.05, 0.0, 0.0);
        a.push(0.5, 0.9, 0.2, 0.0, 0.1, 0.0, 0.05);
        let csv = a.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,S_bar,Ifrak_bar,E_bar,I_bar,R_bar,A");
        assert_eq!(lines[2], "0.5,0.9,0.2,0,0.1,0,5");
    }
}
