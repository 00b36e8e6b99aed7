//! VM catalog, execution time and hourly rental billing.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SECONDS_PER_HOUR: f64 = 3600.0;

#[derive(Debug, Error, PartialEq)]
pub enum CatalogError {
    #[error("catalog must contain at least one VM type")]
    Empty,
    #[error("duplicate VM type name `{0}`")]
    DuplicateName(String),
    #[error("VM type `{0}` must have positive price and capacity")]
    NonPositive(String),
    #[error("catalog JSON: {0}")]
    Json(String),
}

/// An on-demand VM offering. `capacity` is compute units per second.
#[derive(Debug, Clone, PartialEq)]
pub struct VmType {
    pub name: String,
    pub vcpu: u32,
    pub memory_gb: f64,
    pub price_per_hour: f64,
    pub capacity: f64,
}

impl VmType {
    /// Capacity is taken to be the vCPU count.
    pub fn new(name: impl Into<String>, vcpu: u32, memory_gb: f64, price_per_hour: f64) -> Self {
        Self {
            name: name.into(),
            vcpu,
            memory_gb,
            price_per_hour,
            capacity: f64::from(vcpu),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VmCatalog {
    types: Vec<VmType>,
    fastest: usize,
}

impl VmCatalog {
    pub fn new(types: Vec<VmType>) -> Result<Self, CatalogError> {
        if types.is_empty() {
            return Err(CatalogError::Empty);
        }
        for (i, t) in types.iter().enumerate() {
            if !(t.price_per_hour > 0.0 && t.capacity > 0.0) {
                return Err(CatalogError::NonPositive(t.name.clone()));
            }
            if types[..i].iter().any(|o| o.name == t.name) {
                return Err(CatalogError::DuplicateName(t.name.clone()));
            }
        }
        let fastest = types
            .iter()
            .enumerate()
            .fold(0, |best, (i, t)| if t.capacity > types[best].capacity { i } else { best });
        Ok(Self { types, fastest })
    }

    pub fn types(&self) -> &[VmType] {
        &self.types
    }

    pub fn get(&self, index: usize) -> &VmType {
        &self.types[index]
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }

    pub fn fastest_capacity(&self) -> f64 {
        self.types[self.fastest].capacity
    }

    pub fn fastest_index(&self) -> usize {
        self.fastest
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.types.iter().position(|t| t.name == name)
    }

    pub fn to_json(&self) -> String {
        let rows: Vec<CatalogRow> = self
            .types
            .iter()
            .map(|t| CatalogRow {
                name: t.name.clone(),
                vcpu: t.vcpu,
                memory_gb: t.memory_gb,
                price_per_hour: t.price_per_hour,
            })
            .collect();
        serde_json::to_string_pretty(&rows).expect("catalog serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, CatalogError> {
        let rows: Vec<CatalogRow> =
            serde_json::from_str(text).map_err(|e| CatalogError::Json(e.to_string()))?;
        Self::new(rows.into_iter().map(CatalogRow::into_type).collect())
    }
}

impl Default for VmCatalog {
    fn default() -> Self {
        default_catalog()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub(crate) struct CatalogRow {
    pub name: String,
    pub vcpu: u32,
    pub memory_gb: f64,
    pub price_per_hour: f64,
}

impl CatalogRow {
    pub(crate) fn into_type(self) -> VmType {
        VmType::new(self.name, self.vcpu, self.memory_gb, self.price_per_hour)
    }
}

/// Six general-purpose Amazon EC2 m5 on-demand types.
pub fn default_catalog() -> VmCatalog {
    VmCatalog::new(vec![
        VmType::new("m5.large", 2, 8.0, 0.096),
        VmType::new("m5.xlarge", 4, 16.0, 0.192),
        VmType::new("m5.2xlarge", 8, 32.0, 0.384),
        VmType::new("m5.4xlarge", 16, 64.0, 0.768),
        VmType::new("m5.8xlarge", 32, 128.0, 1.536),
        VmType::new("m5.12xlarge", 48, 192.0, 2.304),
    ])
    .expect("default catalog is valid")
}

pub fn exec_time(size: f64, vm_type: &VmType) -> f64 {
    size / vm_type.capacity
}

/// Whole hours billed for a usage interval: fractions round up, and any
/// executed work is billed at least one hour.
pub fn billed_hours(duration: f64) -> f64 {
    (duration / SECONDS_PER_HOUR).ceil().max(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExecutedTask {
    pub workflow: usize,
    pub task: usize,
    pub start: f64,
    pub end: f64,
}

/// A leased VM. Tasks run one at a time in assignment order; the rental
/// interval runs from `lease_start` to the end of the last executed task.
#[derive(Debug, Clone, PartialEq)]
pub struct VmInstance {
    pub id: usize,
    pub vm_type: usize,
    pub lease_start: f64,
    pub busy_until: f64,
    pub last_use_end: f64,
    pub executed: Vec<ExecutedTask>,
}

impl VmInstance {
    pub fn lease(id: usize, vm_type: usize, at: f64) -> Self {
        Self {
            id,
            vm_type,
            lease_start: at,
            busy_until: at,
            last_use_end: at,
            executed: Vec::new(),
        }
    }

    /// Queues a task of duration `exec` no earlier than `ready_at` and
    /// returns its `(start, end)`.
    pub fn assign(&mut self, workflow: usize, task: usize, ready_at: f64, exec: f64) -> (f64, f64) {
        let start = ready_at.max(self.busy_until);
        let end = start + exec;
        self.busy_until = end;
        self.last_use_end = end;
        self.executed.push(ExecutedTask {
            workflow,
            task,
            start,
            end,
        });
        (start, end)
    }

    pub fn used_duration(&self) -> f64 {
        self.last_use_end - self.lease_start
    }

    /// Hours paid so far (zero for an instance that never ran a task).
    pub fn paid_hours(&self) -> f64 {
        if self.executed.is_empty() {
            0.0
        } else {
            billed_hours(self.used_duration())
        }
    }

    pub fn paid_until(&self) -> f64 {
        self.lease_start + self.paid_hours() * SECONDS_PER_HOUR
    }
}

pub fn rental_fee(instance: &VmInstance, catalog: &VmCatalog) -> f64 {
    catalog.get(instance.vm_type).price_per_hour * instance.paid_hours()
}

pub fn total_vm_fee(instances: &[VmInstance], catalog: &VmCatalog) -> f64 {
    instances.iter().map(|v| rental_fee(v, catalog)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn used(vm_type: usize, seconds: f64) -> VmInstance {
        let mut v = VmInstance::lease(0, vm_type, 100.0);
        v.assign(0, 0, 100.0, seconds);
        v
    }

    #[test]
    fn default_catalog_rows() {
        let c = default_catalog();
        assert_eq!(c.get(0), &VmType::new("m5.large", 2, 8.0, 0.096));
        assert_eq!(c.get(5), &VmType::new("m5.12xlarge", 48, 192.0, 2.304));
        assert_eq!(c.fastest_capacity(), 48.0);
        let prices: Vec<f64> = c.types().iter().map(|t| t.price_per_hour).collect();
        assert_eq!(prices, vec![0.096, 0.192, 0.384, 0.768, 1.536, 2.304]);
    }

    #[test]
    fn exec_time_scales_with_capacity() {
        let c = default_catalog();
        assert_eq!(exec_time(96.0, c.get(0)), 48.0);
        assert_eq!(exec_time(96.0, c.get(5)), 2.0);
        assert_eq!(exec_time(96.0, c.get(0)), 24.0 * exec_time(96.0, c.get(5)));
    }

    #[test]
    fn partial_hours_round_up() {
        let c = default_catalog();
        assert_eq!(rental_fee(&used(0, 3599.0), &c), 0.096);
        assert_eq!(rental_fee(&used(0, 3601.0), &c), 0.192);
        assert_eq!(rental_fee(&used(1, 7200.0), &c), 0.384);
    }

    #[test]
    fn unused_instance_is_free_and_zero_length_use_bills_one_hour() {
        let c = default_catalog();
        assert_eq!(rental_fee(&VmInstance::lease(0, 3, 5.0), &c), 0.0);
        assert_eq!(rental_fee(&used(3, 0.0), &c), 0.768);
    }

    #[test]
    fn total_fee_sums_instances() {
        let c = default_catalog();
        assert_eq!(total_vm_fee(&[], &c), 0.0);
        let fee = total_vm_fee(&[used(0, 10.0), used(1, 10.0)], &c);
        assert!((fee - 0.288).abs() < 1e-15);
    }

    #[test]
    fn queued_tasks_start_after_previous_completion() {
        let mut v = VmInstance::lease(0, 0, 0.0);
        let (_, first_end) = v.assign(0, 0, 0.0, 30.0);
        let (second_start, _) = v.assign(0, 1, 10.0, 5.0);
        assert_eq!(second_start, first_end);
    }

    #[test]
    fn catalog_validation() {
        assert_eq!(VmCatalog::new(vec![]), Err(CatalogError::Empty));
        let dup = vec![VmType::new("a", 1, 1.0, 1.0), VmType::new("a", 2, 1.0, 1.0)];
        assert!(matches!(VmCatalog::new(dup), Err(CatalogError::DuplicateName(_))));
        assert!(VmCatalog::new(vec![VmType::new("z", 0, 1.0, 1.0)]).is_err());
    }

    #[test]
    fn catalog_json_derives_capacity_from_vcpu() {
        let c = VmCatalog::from_json(
            r#"[{"name":"tiny","vcpu":3,"memory_gb":1.5,"price_per_hour":0.01}]"#,
        )
        .unwrap();
        assert_eq!(c.get(0).capacity, 3.0);
        assert_eq!(VmCatalog::from_json(&default_catalog().to_json()).unwrap(), default_catalog());
    }
}
