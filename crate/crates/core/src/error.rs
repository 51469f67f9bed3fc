use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure any UUIS operation can report.
///
/// The set is closed: the HTTP layer maps each variant to a stable
/// `(status, code)` pair via [`Error::code`].
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    // storage
    #[error("unknown entity kind {0}")]
    UnknownEntityKind(String),
    #[error("unknown field {field}")]
    UnknownField { field: String },
    #[error("{entity} #{id} not found")]
    NotFound { entity: String, id: i64 },
    #[error("constraint violated: {0}")]
    ConstraintViolation(String),
    #[error("{entity}: duplicate value for ({})", fields.join(", "))]
    UniqueViolation { entity: String, fields: Vec<String> },
    #[error("{entity} #{id} was modified concurrently")]
    Conflict { entity: String, id: i64 },
    #[error("{field} exceeds {max} characters")]
    FieldTooLong { field: String, max: usize },
    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("i/o error: {0}")]
    Io(String),

    // auth
    #[error("invalid user name or password")]
    BadCredentials,
    #[error("{0} is required")]
    MissingField(String),
    #[error("user is not a member of that department")]
    NotAMember,
    #[error("department selection expired, sign in again")]
    ExpiredPending,
    #[error("unknown or expired session")]
    UnknownSession,
    #[error("old password is incorrect")]
    OldPasswordWrong,
    #[error("new passwords do not match")]
    Mismatch,
    #[error("password policy: {0}")]
    PolicyViolation(String),
    #[error("challenge answer is incorrect")]
    ChallengeFailed,
    #[error("invalid e-mail address")]
    InvalidEmail,

    // permissions
    #[error("unknown permission {0}")]
    UnknownPermission(String),
    #[error("{0}")]
    Forbidden(String),
    #[error("grant map is missing: {}", .0.join(", "))]
    IncompleteMap(Vec<String>),

    // assets
    #[error("must fill out mandatory fields: {0}")]
    MissingMandatory(String),
    #[error("User can add asset in user's faculty only")]
    FacultyMismatch,
    #[error("bar code already in use")]
    DuplicateBarCode,
    #[error("extension does not match category: {0}")]
    ExtensionMismatch(String),
    #[error("{0} is not editable")]
    ImmutableField(String),
    #[error("Group must contain at least one asset")]
    EmptyGroup,
    #[error("Group must contain only assets from your faculty")]
    CrossFaculty,
    #[error("Asset #{0} has invalid Asset ID")]
    InvalidAssetId(usize),
    #[error("Invalid Location ID")]
    InvalidLocationId,
    #[error("Invalid User ID")]
    InvalidUserId,
    #[error("Invalid ID")]
    InvalidGroupId,
    #[error("unknown report dimension {0}")]
    UnknownDimension(String),
    #[error("invalid value for {field}: {reason}")]
    InvalidValue { field: String, reason: String },

    // locations
    #[error("name already in use")]
    DuplicateName,
    #[error("a Lab location needs its lab profile")]
    MissingProfile,
    #[error("unknown floor")]
    UnknownFloor,
    #[error("location is not a lab")]
    NotALab,
    #[error("user is already a member")]
    AlreadyMember,
    #[error("lab capacity exceeded")]
    CapacityExceeded,
    #[error("field {0} is not searchable")]
    FieldNotSearchable(String),

    // software
    #[error("duplicate entry")]
    Duplicate,
    #[error("expiration date precedes purchase date")]
    DateOrder,
    #[error("no seats remaining on this license")]
    NoSeatsRemaining,
    #[error("license already assigned to this user")]
    AlreadyAssigned,
    #[error("target asset is not a computer")]
    NotAComputer,
    #[error("license already installed on this computer")]
    AlreadyInstalled,

    // requests
    #[error("description is required")]
    MissingDescription,
    #[error("unknown category {0}")]
    BadCategory(String),
    #[error("{0} does not reference an existing record")]
    UnresolvedReference(String),
    #[error("note field NOT NULL")]
    EmptyNote,
    #[error("request is already closed")]
    AlreadyClosed,
    #[error("request is not pending")]
    NotPending,
    #[error("request is not a specific request")]
    NotSpecific,

    // query language
    #[error("syntax error at {position}: expected {}", expected.join(" or "))]
    Syntax {
        position: usize,
        expected: Vec<String>,
    },
    #[error("query nesting deeper than {0}")]
    DepthExceeded(usize),
    #[error("query longer than {0} characters")]
    QueryTooLong(usize),
    #[error("query expands to too many alternatives")]
    TooComplex,
    #[error("{value:?} is not a valid value for {field}")]
    BadValueForType { field: String, value: String },

    // http input gate
    #[error("invalid parameter {field}: {reason}")]
    ValidationFailed { field: String, reason: String },
}

impl Error {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        use Error::*;
        match self {
            UnknownEntityKind(_) => "UNKNOWN_ENTITY_KIND",
            UnknownField { .. } => "UNKNOWN_FIELD",
            NotFound { .. } => "NOT_FOUND",
            ConstraintViolation(_) => "CONSTRAINT_VIOLATION",
            UniqueViolation { .. } => "UNIQUE_VIOLATION",
            Conflict { .. } => "CONFLICT",
            FieldTooLong { .. } => "FIELD_TOO_LONG",
            Parse { .. } => "PARSE_ERROR",
            Io(_) => "IO_ERROR",
            BadCredentials => "BAD_CREDENTIALS",
            MissingField(_) => "MISSING_FIELD",
            NotAMember => "NOT_A_MEMBER",
            ExpiredPending => "EXPIRED_PENDING",
            UnknownSession => "UNKNOWN_SESSION",
            OldPasswordWrong => "OLD_PASSWORD_WRONG",
            Mismatch => "MISMATCH",
            PolicyViolation(_) => "POLICY_VIOLATION",
            ChallengeFailed => "CHALLENGE_FAILED",
            InvalidEmail => "INVALID_EMAIL",
            UnknownPermission(_) => "UNKNOWN_PERMISSION",
            Forbidden(_) => "FORBIDDEN",
            IncompleteMap(_) => "INCOMPLETE_MAP",
            MissingMandatory(_) => "MISSING_MANDATORY",
            FacultyMismatch => "FACULTY_MISMATCH",
            DuplicateBarCode => "DUPLICATE_BAR_CODE",
            ExtensionMismatch(_) => "EXTENSION_MISMATCH",
            ImmutableField(_) => "IMMUTABLE_FIELD",
            EmptyGroup => "EMPTY_GROUP",
            CrossFaculty => "CROSS_FACULTY",
            InvalidAssetId(_) => "INVALID_ASSET_ID",
            InvalidLocationId => "INVALID_LOCATION_ID",
            InvalidUserId => "INVALID_USER_ID",
            InvalidGroupId => "INVALID_GROUP_ID",
            UnknownDimension(_) => "UNKNOWN_DIMENSION",
            InvalidValue { .. } => "INVALID_VALUE",
            DuplicateName => "DUPLICATE_NAME",
            MissingProfile => "MISSING_PROFILE",
            UnknownFloor => "UNKNOWN_FLOOR",
            NotALab => "NOT_A_LAB",
            AlreadyMember => "ALREADY_MEMBER",
            CapacityExceeded => "CAPACITY_EXCEEDED",
            FieldNotSearchable(_) => "FIELD_NOT_SEARCHABLE",
            Duplicate => "DUPLICATE",
            DateOrder => "DATE_ORDER",
            NoSeatsRemaining => "NO_SEATS_REMAINING",
            AlreadyAssigned => "ALREADY_ASSIGNED",
            NotAComputer => "NOT_A_COMPUTER",
            AlreadyInstalled => "ALREADY_INSTALLED",
            MissingDescription => "MISSING_DESCRIPTION",
            BadCategory(_) => "BAD_CATEGORY",
            UnresolvedReference(_) => "UNRESOLVED_REFERENCE",
            EmptyNote => "EMPTY_NOTE",
            AlreadyClosed => "ALREADY_CLOSED",
            NotPending => "NOT_PENDING",
            NotSpecific => "NOT_SPECIFIC",
            Syntax { .. } => "SYNTAX_ERROR",
            DepthExceeded(_) => "DEPTH_EXCEEDED",
            QueryTooLong(_) => "QUERY_TOO_LONG",
            TooComplex => "TOO_COMPLEX",
            BadValueForType { .. } => "BAD_VALUE_FOR_TYPE",
            ValidationFailed { .. } => "VALIDATION_FAILED",
        }
    }

    /// The offending field, when the error names one.
    pub fn field(&self) -> Option<&str> {
        use Error::*;
        match self {
            UnknownField { field }
            | FieldTooLong { field, .. }
            | InvalidValue { field, .. }
            | BadValueForType { field, .. }
            | ValidationFailed { field, .. } => Some(field),
            MissingField(f)
            | MissingMandatory(f)
            | ImmutableField(f)
            | FieldNotSearchable(f)
            | UnresolvedReference(f) => Some(f),
            _ => None,
        }
    }

    pub fn position(&self) -> Option<usize> {
        match self {
            Error::Syntax { position, .. } => Some(*position),
            _ => None,
        }
    }

    pub(crate) fn unknown_field(field: impl Into<String>) -> Self {
        Error::UnknownField {
            field: field.into(),
        }
    }

    pub(crate) fn not_found(entity: &str, id: i64) -> Self {
        Error::NotFound {
            entity: entity.to_string(),
            id,
        }
    }

    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidValue {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
