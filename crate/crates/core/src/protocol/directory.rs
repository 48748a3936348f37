use std::collections::HashMap;

use crate::acl::{GroupId, ParseError, ParseErrorKind};
use crate::engine::UserId;

/// Which group each user belongs to.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct UserDirectory {
    users: HashMap<UserId, GroupId>,
}

impl UserDirectory {
    pub fn new() -> Self {
        UserDirectory::default()
    }

    pub fn insert(&mut self, user: UserId, group: GroupId) -> Option<GroupId> {
        self.users.insert(user, group)
    }

    pub fn group_of(&self, user: UserId) -> Option<GroupId> {
        self.users.get(&user).copied()
    }

    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    /// Lines of `user <id> <group-id>`; `#` starts a comment. Every group id
    /// must be below `groups`.
    pub fn parse(text: &str, groups: usize) -> Result<UserDirectory, ParseError> {
        let mut dir = UserDirectory::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("");
            let tokens: Vec<(usize, &str)> =
                line.split_whitespace().map(|t| (t.as_ptr() as usize - line.as_ptr() as usize + 1, t)).collect();
            if tokens.is_empty() {
                continue;
            }
            let err = |column: usize, kind| ParseError { line: i + 1, column, kind };
            let end = line.len() + 1;
            match tokens.first() {
                Some((_, "user")) => {}
                Some(&(c, t)) => return Err(err(c, ParseErrorKind::Unexpected { expected: "`user`", found: t.into() })),
                None => unreachable!(),
            }
            let &(uc, ut) = tokens.get(1).ok_or_else(|| err(end, ParseErrorKind::UnexpectedEnd("user id")))?;
            let user: u32 =
                ut.parse().map_err(|_| err(uc, ParseErrorKind::Unexpected { expected: "user id", found: ut.into() }))?;
            let &(gc, gt) = tokens.get(2).ok_or_else(|| err(end, ParseErrorKind::UnexpectedEnd("group id")))?;
            let group: u16 =
                gt.parse().map_err(|_| err(gc, ParseErrorKind::Unexpected { expected: "group id", found: gt.into() }))?;
            if group as usize >= groups {
                return Err(err(gc, ParseErrorKind::GroupOutOfRange { id: gt.into(), n: groups }));
            }
            if let Some(&(c, t)) = tokens.get(3) {
                return Err(err(c, ParseErrorKind::Trailing(t.into())));
            }
            if dir.insert(UserId(user), GroupId(group)).is_some() {
                return Err(err(uc, ParseErrorKind::Config(format!("user {user} listed twice"))));
            }
        }
        Ok(dir)
    }
}

impl FromIterator<(UserId, GroupId)> for UserDirectory {
    fn from_iter<I: IntoIterator<Item = (UserId, GroupId)>>(iter: I) -> Self {
        UserDirectory { users: iter.into_iter().collect() }
    }
}
