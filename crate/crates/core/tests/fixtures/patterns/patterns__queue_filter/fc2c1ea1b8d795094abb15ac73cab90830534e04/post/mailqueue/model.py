def _get_filter(self):
    clauses = []
    if self.sender:
        clauses.append("sender = '%s'" % self.sender)
    if self.queueid:
        clauses.append("queueid = '%s'" % self.queueid.replace("'", "\\'").replace('"', '\\"'))
    return " AND ".join(clauses)
