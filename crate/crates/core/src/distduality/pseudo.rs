use super::d235::{Prolongation, SolvedE, DEFAULT_SAMPLES};
use super::DistError;
use crate::scalar::{Chart, SampleBox, Value};
use crate::vecfield::{
    box_points, derived_flag, lie_bracket, rank_at, reduce_mod, DistributionFlag, Frame, Point,
    Reduction, VectorField,
};

/// A splitting E = K ⊕ L of a rank-2 distribution into line fields.
#[derive(Clone, Debug)]
pub struct PseudoProductStructure {
    chart: Chart,
    k: VectorField,
    l: VectorField,
    flag: DistributionFlag,
}

impl PseudoProductStructure {
    /// E is spanned by `k` and `l`, which must be independent at `base`.
    pub fn new(
        chart: &Chart,
        k: VectorField,
        l: VectorField,
        base: Point,
    ) -> Result<Self, DistError> {
        let e = Frame::new(chart, vec![k.clone(), l.clone()], base)?;
        let flag = derived_flag(&e, chart.dim())?;
        Ok(PseudoProductStructure {
            chart: chart.clone(),
            k,
            l,
            flag,
        })
    }

    /// K = ⟨ζ₁ + eζ₂⟩, L = ⟨ζ₂⟩ on the prolongation.
    pub fn from_prolongation(p: &Prolongation, e: &SolvedE) -> Result<Self, DistError> {
        let k = e.k_generator(p).ok_or(DistError::NoClosedForm)?;
        Self::new(&p.chart, k, p.zeta2.clone(), p.base.clone())
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn k(&self) -> &VectorField {
        &self.k
    }

    pub fn l(&self) -> &VectorField {
        &self.l
    }

    pub fn base(&self) -> &[Value] {
        self.flag.base()
    }

    /// The derived flag E ⊂ ∂E ⊂ ∂⁽²⁾E ⊂ …
    pub fn flag(&self) -> &DistributionFlag {
        &self.flag
    }

    /// The same structure with the roles of K and L exchanged.
    pub fn swapped(&self) -> Result<Self, DistError> {
        Self::new(
            &self.chart,
            self.l.clone(),
            self.k.clone(),
            self.base().to_vec(),
        )
    }
}

/// Which line field a condition brackets with.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Line {
    K,
    L,
}

/// One of the seven defining bracket relations [X, 𝒜] = 𝓑.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Condition {
    pub index: usize,
    pub line: Line,
    /// Flag level of 𝒜; `None` for 𝓛 itself.
    pub source: Option<usize>,
    /// Flag level of 𝓑.
    pub target: usize,
}

pub const CONDITIONS: [Condition; 7] = [
    Condition {
        index: 1,
        line: Line::K,
        source: None,
        target: 1,
    },
    Condition {
        index: 2,
        line: Line::K,
        source: Some(1),
        target: 2,
    },
    Condition {
        index: 3,
        line: Line::L,
        source: Some(1),
        target: 1,
    },
    Condition {
        index: 4,
        line: Line::K,
        source: Some(2),
        target: 3,
    },
    Condition {
        index: 5,
        line: Line::L,
        source: Some(2),
        target: 2,
    },
    Condition {
        index: 6,
        line: Line::K,
        source: Some(3),
        target: 3,
    },
    Condition {
        index: 7,
        line: Line::L,
        source: Some(3),
        target: 4,
    },
];

impl Condition {
    pub fn label(&self) -> String {
        let level = |i: usize| match i {
            1 => "∂E".to_string(),
            n => format!("∂^{n}E"),
        };
        let line = match self.line {
            Line::K => "K",
            Line::L => "L",
        };
        let src = match self.source {
            None => "L".to_string(),
            Some(i) => level(i),
        };
        format!("[{line},{src}] = {}", level(self.target))
    }
}

/// Why a condition failed at a point.
#[derive(Clone, Debug, PartialEq)]
pub enum Failure {
    /// The bracket of the line generator with source generator `generator` leaves 𝓑.
    NotContained {
        generator: usize,
        residual: Vec<f64>,
    },
    /// [X, 𝒜] lies in 𝓑 but spans less than it.
    RankDeficit { rank: usize, expected: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionWitness {
    pub point: Point,
    pub failure: Failure,
}

#[derive(Clone, Debug)]
pub struct ConditionResult {
    pub condition: Condition,
    pub pass: bool,
    pub witness: Option<ConditionWitness>,
}

#[derive(Clone, Debug)]
pub struct PseudoProductReport {
    pub conditions: Vec<ConditionResult>,
    pub samples: usize,
}

impl PseudoProductReport {
    pub fn valid(&self) -> bool {
        self.conditions.iter().all(|c| c.pass)
    }

    /// Indices of the failing conditions.
    pub fn failed(&self) -> Vec<usize> {
        self.conditions
            .iter()
            .filter(|c| !c.pass)
            .map(|c| c.condition.index)
            .collect()
    }
}

fn f64s(v: &[Value]) -> Vec<f64> {
    v.iter().map(Value::to_f64).collect()
}

/// Checks the seven relations at the base point and at box samples. Each relation
/// [X, 𝒜] = 𝓑 holds when 𝒜 + X + [X, 𝒜] lies in 𝓑 and has the same rank.
pub fn verify_pseudo_product(
    p: &PseudoProductStructure,
    bx: &SampleBox,
) -> Result<PseudoProductReport, DistError> {
    let growth = p.flag.growth();
    if growth != [2, 3, 4, 5, 6] {
        return Err(DistError::Growth {
            expected: vec![2, 3, 4, 5, 6],
            got: growth,
        });
    }
    let mut points = vec![p.base().to_vec()];
    points.extend(box_points(&p.chart, bx, p.base(), DEFAULT_SAMPLES));
    let mut results = Vec::new();
    for cond in CONDITIONS {
        let x = match cond.line {
            Line::K => &p.k,
            Line::L => &p.l,
        };
        let source: Vec<VectorField> = match cond.source {
            None => vec![p.l.clone()],
            Some(i) => p.flag.level_fields(i).to_vec(),
        };
        let brackets = source
            .iter()
            .map(|w| lie_bracket(x, w))
            .collect::<Result<Vec<_>, _>>()?;
        let mut spanned = source.clone();
        spanned.push(x.clone());
        spanned.extend(brackets.iter().cloned());
        let target = p.flag.level(cond.target);
        let mut witness = None;
        'points: for pt in &points {
            for (j, b) in brackets.iter().enumerate() {
                if let Reduction::Residual(r) = reduce_mod(b, &target, pt)? {
                    witness = Some(ConditionWitness {
                        point: pt.clone(),
                        failure: Failure::NotContained {
                            generator: j,
                            residual: f64s(&r),
                        },
                    });
                    break 'points;
                }
            }
            let rank = rank_at(&spanned, pt)?;
            let expected = target.rank_at(pt)?;
            if rank != expected {
                witness = Some(ConditionWitness {
                    point: pt.clone(),
                    failure: Failure::RankDeficit { rank, expected },
                });
                break;
            }
        }
        results.push(ConditionResult {
            condition: cond,
            pass: witness.is_none(),
            witness,
        });
    }
    Ok(PseudoProductReport {
        conditions: results,
        samples: points.len() - 1,
    })
}

/// One checked relation of the graded symbol algebra.
#[derive(Clone, Debug, PartialEq)]
pub struct SymbolRelation {
    pub label: String,
    pub holds: bool,
}

/// The symbol algebra in the basis e₁ = k, e₂ = l, e₃ = [e₁,e₂], e₄ = [e₁,e₃],
/// e₅ = [e₁,e₄], e₆ = [e₂,e₅], with weights 1, 1, 2, 3, 4, 5.
#[derive(Clone, Debug)]
pub struct SymbolAlgebraReport {
    pub point: Point,
    pub relations: Vec<SymbolRelation>,
    /// Components of the basis vectors at the point.
    pub basis: Vec<Vec<f64>>,
}

impl SymbolAlgebraReport {
    pub fn matches_model(&self) -> bool {
        self.relations.iter().all(|r| r.holds)
    }

    pub fn first_failure(&self) -> Option<&str> {
        self.relations
            .iter()
            .find(|r| !r.holds)
            .map(|r| r.label.as_str())
    }
}

fn in_level(
    v: &VectorField,
    flag: &DistributionFlag,
    level: usize,
    pt: &[Value],
) -> Result<bool, DistError> {
    Ok(reduce_mod(v, &flag.level(level), pt)?.is_member())
}

/// Compares the graded algebra of the flag at `point` with the model: each eᵢ has
/// exact weight, and [e₂,e₃], [e₂,e₄], [e₁,e₅] vanish modulo lower weight.
pub fn symbol_algebra_at(
    p: &PseudoProductStructure,
    point: &[Value],
) -> Result<SymbolAlgebraReport, DistError> {
    let growth = p.flag.growth_at(point)?;
    if growth != [2, 3, 4, 5, 6] {
        return Err(DistError::Growth {
            expected: vec![2, 3, 4, 5, 6],
            got: growth,
        });
    }
    let e1 = p.k.clone();
    let e2 = p.l.clone();
    let e3 = lie_bracket(&e1, &e2)?;
    let e4 = lie_bracket(&e1, &e3)?;
    let e5 = lie_bracket(&e1, &e4)?;
    let e6 = lie_bracket(&e2, &e5)?;
    let basis = [
        e1.clone(),
        e2.clone(),
        e3.clone(),
        e4.clone(),
        e5.clone(),
        e6.clone(),
    ];
    let mut relations = Vec::new();
    // Flag level index of weight w is w - 1.
    let weights = [1usize, 1, 2, 3, 4, 5];
    for (i, (v, w)) in basis.iter().zip(weights).enumerate() {
        let inside = in_level(v, &p.flag, w - 1, point)?;
        let above = w == 1 || !in_level(v, &p.flag, w - 2, point)?;
        relations.push(SymbolRelation {
            label: format!("e{} has weight {w}", i + 1),
            holds: inside && above,
        });
    }
    let independent = rank_at(&basis, point)? == 6;
    relations.push(SymbolRelation {
        label: "e1..e6 span the tangent space".into(),
        holds: independent,
    });
    for (a, b, ia, ib, w) in [
        (&e2, &e3, 2, 3, 3usize),
        (&e2, &e4, 2, 4, 4),
        (&e1, &e5, 1, 5, 5),
    ] {
        let br = lie_bracket(a, b)?;
        relations.push(SymbolRelation {
            label: format!("[e{ia},e{ib}] = 0"),
            holds: in_level(&br, &p.flag, w - 2, point)?,
        });
    }
    Ok(SymbolAlgebraReport {
        point: point.to_vec(),
        relations,
        basis: basis
            .iter()
            .map(|v| v.eval_f64(point))
            .collect::<Result<_, _>>()?,
    })
}
