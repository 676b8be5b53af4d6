use super::field::{lie_bracket, rank_at, Frame, Point, VectorField};
use super::VecFieldError;
use crate::scalar::{Chart, Value};

/// The filtration F₀ ⊂ F₁ ⊂ … of a distribution, stored as one cumulative list of
/// fields with the end index of each level.
#[derive(Clone, Debug)]
pub struct DistributionFlag {
    chart: Chart,
    fields: Vec<VectorField>,
    ends: Vec<usize>,
    base: Point,
    stabilized: bool,
}

impl DistributionFlag {
    /// Builds a flag from explicit cumulative levels (each a prefix of the next).
    pub fn from_levels(
        chart: &Chart,
        fields: Vec<VectorField>,
        ends: Vec<usize>,
        base: Point,
    ) -> Result<Self, VecFieldError> {
        Frame::new(chart, fields.clone(), base.clone())?;
        Ok(DistributionFlag {
            chart: chart.clone(),
            fields,
            ends,
            base,
            stabilized: false,
        })
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn base(&self) -> &[Value] {
        &self.base
    }

    pub fn depth(&self) -> usize {
        self.ends.len()
    }

    pub fn stabilized(&self) -> bool {
        self.stabilized
    }

    /// Fields generating level i (cumulative).
    pub fn level_fields(&self, i: usize) -> &[VectorField] {
        &self.fields[..self.ends[i]]
    }

    pub fn level(&self, i: usize) -> Frame {
        Frame::new(
            &self.chart,
            self.level_fields(i).to_vec(),
            self.base.clone(),
        )
        .expect("flag levels are independent at the base point")
    }

    pub fn fields(&self) -> &[VectorField] {
        &self.fields
    }

    /// Ranks of the levels at the base point.
    pub fn growth(&self) -> Vec<usize> {
        self.ends.clone()
    }

    /// Ranks of the stored level frames at another point.
    pub fn growth_at(&self, point: &[Value]) -> Result<Vec<usize>, VecFieldError> {
        self.ends
            .iter()
            .map(|&e| rank_at(&self.fields[..e], point))
            .collect()
    }

    /// Checks that the growth at every point equals the base growth. Returns the first
    /// point where it differs.
    pub fn check_constant_rank(
        &self,
        points: &[Point],
    ) -> Result<Option<(Point, Vec<usize>)>, VecFieldError> {
        for p in points {
            let g = self.growth_at(p)?;
            if g != self.ends {
                return Ok(Some((p.clone(), g)));
            }
        }
        Ok(None)
    }
}

/// Iterated brackets of the generators against the newest level, appending any bracket
/// that raises the rank at the base point. Candidates are visited in order of
/// (generator index, field index).
pub fn derived_flag(
    generators: &Frame,
    max_depth: usize,
) -> Result<DistributionFlag, VecFieldError> {
    let chart = generators.chart().clone();
    let base = generators.base().to_vec();
    let gens = generators.fields().to_vec();
    let mut fields = gens.clone();
    let mut ends = vec![fields.len()];
    let mut newest = 0..fields.len();
    let mut stabilized = false;
    for _ in 0..max_depth {
        if fields.len() == chart.dim() {
            stabilized = true;
            break;
        }
        let mut added = Vec::new();
        for g in &gens {
            for w in &fields[newest.clone()] {
                let b = lie_bracket(g, w)?;
                if b.is_zero() {
                    continue;
                }
                let mut trial: Vec<VectorField> = fields.iter().chain(&added).cloned().collect();
                trial.push(b.clone());
                if rank_at(&trial, &base)? == trial.len() {
                    added.push(b);
                }
            }
        }
        if added.is_empty() {
            stabilized = true;
            break;
        }
        let start = fields.len();
        fields.extend(added);
        newest = start..fields.len();
        ends.push(fields.len());
    }
    Ok(DistributionFlag {
        chart,
        fields,
        ends,
        base,
        stabilized,
    })
}
