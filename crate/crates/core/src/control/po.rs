/// Classic perturb-and-observe on the voltage command.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbObserve {
    pub step_v: f64,
    pub direction: f64,
    pub last_power: Option<f64>,
}

impl PerturbObserve {
    pub fn new(step_v: f64) -> Self {
        PerturbObserve {
            step_v,
            direction: 1.0,
            last_power: None,
        }
    }

    /// Forget the previous sample; the next call only records power and
    /// perturbs in the current direction.
    pub fn reset(&mut self) {
        self.last_power = None;
    }

    /// Next command given the power observed at the current one.
    pub fn step(&mut self, power: f64, v_ref: f64) -> f64 {
        if let Some(last) = self.last_power {
            if power < last {
                self.direction = -self.direction;
            }
        }
        self.last_power = Some(power);
        v_ref + self.direction * self.step_v
    }
}
