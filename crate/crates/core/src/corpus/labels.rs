use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

macro_rules! label_enum {
    (
        $(#[$meta:meta])*
        $name:ident, $what:literal {
            $($variant:ident => $text:literal $(| $alias:literal)*),+ $(,)?
        }
    ) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum $name {
            $(
                #[serde(rename = $text $(, alias = $alias)*)]
                $variant,
            )+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn count() -> usize {
                Self::ALL.len()
            }

            pub fn index(self) -> usize {
                self as usize
            }

            pub fn from_index(i: usize) -> Option<Self> {
                Self::ALL.get(i).copied()
            }

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text,)+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($text $(| $alias)* => Ok($name::$variant),)+
                    other => Err(Error::InvalidArgument(format!(
                        concat!("unknown ", $what, " label `{}`"),
                        other
                    ))),
                }
            }
        }
    };
}

label_enum! {
    /// Conversation topic.
    Topic, "topic" {
        Politics => "Politics",
        Fashion => "Fashion",
        Sports => "Sports",
        ScienceAndTechnology => "ScienceAndTechnology",
        EntertainmentMusic => "EntertainmentMusic",
        EntertainmentMovies => "EntertainmentMovies",
        EntertainmentBooks => "EntertainmentBooks",
        EntertainmentGeneral => "EntertainmentGeneral",
        Phatic => "Phatic",
        Interactive => "Interactive",
        Other => "Other",
        InappropriateContent => "InappropriateContent" | "Inappropriate Content",
    }
}

label_enum! {
    /// Communicative function of an utterance. `NotSet` marks utterances the
    /// annotators skipped.
    DialogAct, "dialog act" {
        InformationRequest => "InformationRequest",
        InformationDelivery => "InformationDelivery",
        OpinionRequest => "OpinionRequest",
        OpinionExpression => "OpinionExpression",
        GeneralChat => "GeneralChat",
        Clarification => "Clarification",
        TopicSwitch => "TopicSwitch",
        UserInstruction => "UserInstruction",
        InstructionResponse => "InstructionResponse",
        Inappropriate => "Inappropriate",
        Other => "Other",
        FrustrationExpression => "FrustrationExpression",
        MultipleGoals => "MultipleGoals",
        NotSet => "NotSet" | "Not Set",
    }
}

/// Which label an example or model predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Topic,
    DialogAct,
}

impl Task {
    pub fn num_labels(self) -> usize {
        match self {
            Task::Topic => Topic::count(),
            Task::DialogAct => DialogAct::count(),
        }
    }

    pub fn label_names(self) -> Vec<&'static str> {
        match self {
            Task::Topic => Topic::ALL.iter().map(|t| t.as_str()).collect(),
            Task::DialogAct => DialogAct::ALL.iter().map(|a| a.as_str()).collect(),
        }
    }

    pub fn label_name(self, index: usize) -> Option<&'static str> {
        match self {
            Task::Topic => Topic::from_index(index).map(Topic::as_str),
            Task::DialogAct => DialogAct::from_index(index).map(DialogAct::as_str),
        }
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "topic" => Ok(Task::Topic),
            "act" | "dialog_act" => Ok(Task::DialogAct),
            other => Err(Error::InvalidArgument(format!("unknown task `{other}`"))),
        }
    }
}

/// A gold label of either kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Topic(Topic),
    Act(DialogAct),
}

impl Label {
    pub fn index(self) -> usize {
        match self {
            Label::Topic(t) => t.index(),
            Label::Act(a) => a.index(),
        }
    }

    pub fn task(self) -> Task {
        match self {
            Label::Topic(_) => Task::Topic,
            Label::Act(_) => Task::DialogAct,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Topic(t) => t.fmt(f),
            Label::Act(a) => a.fmt(f),
        }
    }
}
